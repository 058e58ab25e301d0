// affdepth: command-line front end. Exit codes: 0 ok, 1 usage, 2 data, 3 numerical.

#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "affdepth/curriculum.hpp"
#include "affdepth/error.hpp"
#include "affdepth/evaluate.hpp"
#include "affdepth/formats.hpp"
#include "affdepth/geometry.hpp"
#include "affdepth/gradcheck.hpp"
#include "affdepth/ingest.hpp"
#include "affdepth/io.hpp"
#include "affdepth/losses.hpp"
#include "affdepth/scene.hpp"
#include "affdepth/trainer.hpp"

namespace fs = std::filesystem;
using namespace affdepth;

namespace {

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

const std::vector<std::string> kLossNames{"mse", "silog", "ranking", "ssi", "vnl", "sn", "combined"};
const std::vector<std::string> kModeNames{"mcl", "mcl-r", "uniform"};

void require_file(const fs::path& p) {
    if (!fs::is_regular_file(p)) throw UsageError("input file not found: " + p.string());
}

std::vector<double> parse_list(const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            out.push_back(std::stod(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw UsageError("not a number: '" + item + "'");
        }
    }
    if (out.empty()) throw UsageError("empty list");
    return out;
}

// Re-seeds every scene stream and the training seed from one value.
void apply_seed(ExperimentConfig& cfg, std::uint64_t seed) {
    for (std::size_t j = 0; j < cfg.parts.size(); ++j) cfg.parts[j].seed = mix_seed(seed, j);
    cfg.train.seed = seed;
}

ExperimentConfig load_experiment(const fs::path& path, const std::optional<std::uint64_t>& seed) {
    require_file(path);
    auto cfg = experiment_from_json(read_file(path));
    if (seed) apply_seed(cfg, *seed);
    return cfg;
}

std::vector<ScoreRow> score_rows(const std::vector<DataPart>& parts, const DifficultyScores& scores) {
    std::vector<ScoreRow> rows;
    for (const auto& p : parts) {
        for (const auto& s : p.samples) rows.push_back({s.id, p.id, scores.at(s.id)});
    }
    return rows;
}

DifficultyScores run_teachers(const ExperimentConfig& cfg, const std::vector<DataPart>& parts, bool aligned) {
    TrainConfig tc = cfg.train;
    tc.iterations = cfg.teacher_iterations;
    return train_teachers(parts, tc, aligned).scores;
}

// ---- subcommands -----------------------------------------------------------

struct MetricsArgs {
    std::string pred, gt, mask, pairs, align = "lsq", out;
    double whdr_tau = 0.02;
};

int cmd_metrics(const MetricsArgs& a) {
    require_file(a.pred);
    require_file(a.gt);
    const DepthMap pred = read_pfm(a.pred);
    const DepthMap gt = read_pfm(a.gt);
    if (!pred.same_shape(gt)) throw DataError("prediction and ground truth differ in shape");

    EvaluateOptions opts;
    opts.align = a.align == "lsq" ? Alignment::lsq : Alignment::none;
    opts.whdr_tau = a.whdr_tau;
    if (!a.mask.empty()) {
        require_file(a.mask);
        const FloatGrid m = read_pfm_grid(a.mask);
        if (m.width != gt.width() || m.height != gt.height()) throw DataError("mask differs in shape");
        Mask sub(m.data.size());
        for (std::size_t i = 0; i < sub.size(); ++i) sub[i] = std::isfinite(m.data[i]) && m.data[i] != 0.0f;
        opts.submask = std::move(sub);
    }
    if (!a.pairs.empty()) {
        require_file(a.pairs);
        opts.pairs = parse_pairs_csv(read_file(a.pairs), gt.width(), gt.height());
    }
    const MetricsReport report = evaluate(pred, gt, opts);
    write_file(a.out, metrics_to_json(report));
    std::cout << format_number(report.abs_rel) << "\n";
    return 0;
}

struct GradcheckArgs {
    std::string loss = "mse";
    std::size_t trials = 100;
    std::uint64_t seed = 0;
    bool pipeline = false;
};

int cmd_gradcheck(const GradcheckArgs& a) {
    const auto kind = *parse_loss(a.loss);
    const auto summary = run_gradcheck(kind, a.trials, a.seed, a.pipeline);
    for (std::size_t t = 0; t < summary.trials.size(); ++t) {
        const auto& tr = summary.trials[t];
        std::cout << "trial " << t << " " << tr.width << "x" << tr.height << " max_rel_err "
                  << format_number(tr.max_rel_err) << "\n";
    }
    const bool ok = summary.passed();
    std::cout << (ok ? "PASS" : "FAIL") << " loss=" << a.loss << (a.pipeline ? " (pipeline)" : "")
              << " trials=" << a.trials << " worst=" << format_number(summary.worst())
              << " threshold=" << format_number(summary.threshold) << "\n";
    return ok ? 0 : 3;
}

struct PointcloudArgs {
    std::string depth, rgb, out;
    double fx = 0, fy = 0, cx = 0, cy = 0;
};

int cmd_pointcloud(const PointcloudArgs& a) {
    const CameraIntrinsics k{a.fx, a.fy, a.cx, a.cy};
    try {
        k.validate();
    } catch (const DataError& e) {
        throw UsageError(e.what());
    }
    require_file(a.depth);
    const DepthMap depth = read_pfm(a.depth);
    PointCloud cloud = unproject(depth, k);
    if (!a.rgb.empty()) {
        require_file(a.rgb);
        const RgbImage img = read_ppm(a.rgb);
        if (img.width != depth.width() || img.height != depth.height()) throw DataError("RGB image differs in shape");
        std::vector<Rgb> colors;
        for (std::size_t i = 0; i < depth.size(); ++i) {
            if (depth.valid(i)) colors.push_back(img.pixels[i]);
        }
        cloud.colors = std::move(colors);
    }
    write_ply(cloud, a.out);
    std::cout << cloud.points.size() << " vertices\n";
    return 0;
}

struct IngestArgs {
    std::string lr_prefix, rl_prefix, out_depth, out_report, scale = "median";
    IngestThresholds thresholds;
};

FlowField read_flow(const std::string& prefix) {
    const fs::path dx_path = prefix + ".dx.pfm";
    const fs::path dy_path = prefix + ".dy.pfm";
    require_file(dx_path);
    require_file(dy_path);
    const FloatGrid dx = read_pfm_grid(dx_path);
    const FloatGrid dy = read_pfm_grid(dy_path);
    if (dx.width != dy.width || dx.height != dy.height) throw DataError("flow channels differ in shape: " + prefix);
    FlowField f{dx.width, dx.height, std::vector<double>(dx.data.size()), std::vector<double>(dx.data.size()),
                Mask(dx.data.size())};
    for (std::size_t i = 0; i < f.size(); ++i) {
        f.mask[i] = std::isfinite(dx.data[i]) && std::isfinite(dy.data[i]);
        f.dx[i] = f.mask[i] ? dx.data[i] : 0.0;
        f.dy[i] = f.mask[i] ? dy.data[i] : 0.0;
    }
    return f;
}

int cmd_ingest(const IngestArgs& a) {
    DepthScale scale = DepthScale::median_one();
    if (a.scale != "median") {
        const auto v = parse_list(a.scale);
        if (v.size() != 1 || !(v[0] > 0.0)) throw UsageError("--scale must be 'median' or a positive number");
        scale = DepthScale::fixed(v[0]);
    }
    const FlowField left = read_flow(a.lr_prefix);
    const FlowField right = read_flow(a.rl_prefix);
    const IngestResult result = ingest_pipeline(left, right, a.thresholds, scale);
    write_file(a.out_report, ingest_report_to_json(result.report));
    if (!result.report.accepted) {
        std::cerr << "rejected: " << result.report.n_valid << " of " << result.report.n_total
                  << " pixels valid after filtering\n";
        return 2;
    }
    write_pfm(*result.depth, a.out_depth);
    std::cout << "accepted: " << result.report.n_valid << " of " << result.report.n_total << " pixels valid\n";
    return 0;
}

struct SynthArgs {
    std::string config, out_dir;
    std::optional<std::uint64_t> seed;
};

nlohmann::json write_sample(const Sample& s, const fs::path& root, const char* split) {
    const std::string name = "sample_" + std::to_string(s.id);
    const fs::path dir = root / name;
    fs::create_directories(dir);
    for (int c = 0; c < Image::kChannels; ++c) {
        FloatGrid g{s.image.width, s.image.height, std::vector<float>(s.image.plane())};
        for (std::size_t i = 0; i < g.data.size(); ++i) g.data[i] = static_cast<float>(s.image.data[c * s.image.plane() + i]);
        write_pfm_grid(g, dir / ("image_" + std::to_string(c) + ".pfm"));
    }
    write_pfm(s.gt_stored, dir / "gt_stored.pfm");
    write_pfm(s.gt_true, dir / "gt_true.pfm");
    const auto& k = s.intrinsics;
    return {{"id", s.id},
            {"part_id", s.part_id},
            {"split", split},
            {"dir", name},
            {"hidden", {{"scale", s.hidden.scale}, {"shift", s.hidden.shift}}},
            {"noise_level", s.noise_level},
            {"intrinsics", {{"fx", k.fx}, {"fy", k.fy}, {"cx", k.cx}, {"cy", k.cy}}}};
}

int cmd_synth(const SynthArgs& a) {
    const auto cfg = load_experiment(a.config, a.seed);
    const auto parts = gen_parts(cfg.parts, cfg.n_per_part);
    const auto val = gen_validation(cfg.parts, cfg.n_val_per_part,
                                    static_cast<SampleId>(cfg.parts.size() * cfg.n_per_part));
    const fs::path root = a.out_dir;
    fs::create_directories(root);
    nlohmann::json samples = nlohmann::json::array();
    for (const auto& p : parts) {
        for (const auto& s : p.samples) samples.push_back(write_sample(s, root, "train"));
    }
    for (const auto& s : val) samples.push_back(write_sample(s, root, "val"));
    const nlohmann::json manifest{{"config", nlohmann::json::parse(experiment_to_json(cfg))}, {"samples", samples}};
    write_file(root / "manifest.json", manifest.dump(2) + "\n");
    std::cout << samples.size() << " samples written to " << root.string() << "\n";
    return 0;
}

struct TeachersArgs {
    std::string config, out;
    std::optional<std::uint64_t> seed;
    bool raw = false;
};

int cmd_teachers(const TeachersArgs& a) {
    const auto cfg = load_experiment(a.config, a.seed);
    const auto parts = gen_parts(cfg.parts, cfg.n_per_part);
    const auto scores = run_teachers(cfg, parts, !a.raw);
    write_file(a.out, format_scores_csv(score_rows(parts, scores)));
    return 0;
}

struct PlanArgs {
    std::string scores, p, mode = "mcl", out;
    std::size_t step_len = 100, batch_size = 3, iters = 1000;
};

int cmd_plan(const PlanArgs& a) {
    require_file(a.scores);
    const auto rows = parse_scores_csv(read_file(a.scores));
    const auto parts = parts_from_scores(rows);
    auto p = parse_list(a.p);
    if (p.size() == 1) p.assign(parts.size(), p[0]);
    if (p.size() != parts.size()) throw UsageError("--p needs one value or one per part");
    const PacingConfig pacing{p, a.step_len, a.batch_size, a.iters};
    const auto plan = make_plan(parts, scores_from_rows(rows), pacing, *parse_mode(a.mode));
    write_file(a.out, plan_to_json(plan));
    return 0;
}

struct TrainArgs {
    std::string config, curriculum = "uniform", out, plan, scores, loss;
    std::optional<std::uint64_t> seed;
};

int cmd_train(const TrainArgs& a) {
    auto cfg = load_experiment(a.config, a.seed);
    if (!a.loss.empty()) cfg.train.loss = *parse_loss(a.loss);
    const auto parts = gen_parts(cfg.parts, cfg.n_per_part);
    const auto val = gen_validation(cfg.parts, cfg.n_val_per_part,
                                    static_cast<SampleId>(cfg.parts.size() * cfg.n_per_part));
    const auto mode = *parse_mode(a.curriculum);

    CurriculumPlan plan;
    if (!a.plan.empty()) {
        require_file(a.plan);
        plan = plan_from_json(read_file(a.plan));
        if (plan.mode != mode) throw UsageError("--curriculum disagrees with the plan file's mode");
    } else if (mode == CurriculumMode::uniform) {
        plan = uniform_plan(parts, cfg.train);
    } else {
        DifficultyScores scores;
        if (!a.scores.empty()) {
            require_file(a.scores);
            scores = scores_from_rows(parse_scores_csv(read_file(a.scores)));
        } else {
            scores = run_teachers(cfg, parts, true);
        }
        std::vector<Part> ps;
        for (const auto& dp : parts) ps.push_back(dp.part());
        plan = make_plan(ps, scores, {cfg.p, cfg.step_len, cfg.train.batch_size, cfg.train.iterations}, mode);
    }

    const auto result = train(parts, val, plan, cfg.train);
    const fs::path dir = a.out;
    fs::create_directories(dir);
    write_file(dir / "checkpoint.json", checkpoint_to_json({result.model, cfg.train.seed, plan.pacing.total_iters}));
    write_file(dir / "history.csv", format_history_csv(result.history));
    if (const auto v = result.final_val_abs_rel()) std::cout << "final val_abs_rel " << format_number(*v) << "\n";
    return 0;
}

struct LossesArgs {
    std::string pred, gt, loss = "mse", pairs, grad_out;
    std::optional<double> fx, fy, cx, cy;
    double lambda = 1.0;
    std::uint64_t seed = 0;
};

int cmd_losses(const LossesArgs& a) {
    require_file(a.pred);
    require_file(a.gt);
    const DepthMap pred = read_pfm(a.pred);
    const DepthMap gt = read_pfm(a.gt);
    if (!pred.same_shape(gt)) throw DataError("prediction and ground truth differ in shape");
    CameraIntrinsics k = scene_intrinsics(gt.width(), gt.height());
    if (a.fx) k.fx = *a.fx;
    if (a.fy) k.fy = *a.fy;
    if (a.cx) k.cx = *a.cx;
    if (a.cy) k.cy = *a.cy;
    try {
        k.validate();
    } catch (const DataError& e) {
        throw UsageError(e.what());
    }
    const auto kind = *parse_loss(a.loss);
    LossResult r;
    if (kind == LossKind::ranking) {
        if (a.pairs.empty()) throw UsageError("--loss ranking needs --pairs");
        require_file(a.pairs);
        std::vector<OrdinalPair> pairs;
        for (const auto& wp : parse_pairs_csv(read_file(a.pairs), gt.width(), gt.height())) pairs.push_back(wp.pair);
        r = ranking_loss(pred, pairs);
    } else {
        r = sample_loss(kind, pred, gt, k, a.lambda, a.seed);
    }
    if (!a.grad_out.empty()) {
        FloatGrid g{pred.width(), pred.height(), std::vector<float>(r.gradient.size())};
        for (std::size_t i = 0; i < g.data.size(); ++i) g.data[i] = static_cast<float>(r.gradient[i]);
        write_pfm_grid(g, a.grad_out);
    }
    std::cout << nlohmann::json{{"loss", a.loss}, {"value", r.value}}.dump() << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Affine-invariant depth toolkit: losses, metrics, curriculum training and data ingest"};
    app.failure_message(CLI::FailureMessage::help);
    app.require_subcommand(1, 1);
    std::function<int()> run;

    MetricsArgs ma;
    auto* metrics = app.add_subcommand("metrics", "Evaluate a predicted depth map against ground truth");
    metrics->add_option("--pred", ma.pred, "Predicted depth (PFM)")->required();
    metrics->add_option("--gt", ma.gt, "Ground-truth depth (PFM)")->required();
    metrics->add_option("--mask", ma.mask, "Submask PFM (nonzero = inside) for Si-hum / Si-env");
    metrics->add_option("--pairs", ma.pairs, "Ordinal pairs CSV for WHDR");
    metrics->add_option("--align", ma.align, "Alignment before scoring")->check(CLI::IsMember({"lsq", "none"}))
        ->capture_default_str();
    metrics->add_option("--whdr-tau", ma.whdr_tau, "Ratio threshold for WHDR relations")->capture_default_str();
    metrics->add_option("--out", ma.out, "Report JSON")->required();
    metrics->callback([&] { run = [&] { return cmd_metrics(ma); }; });

    GradcheckArgs ga;
    auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference check of analytic loss gradients");
    gradcheck->add_option("--loss", ga.loss)->check(CLI::IsMember(kLossNames))->capture_default_str();
    gradcheck->add_option("--trials", ga.trials)->capture_default_str();
    gradcheck->add_option("--seed", ga.seed)->capture_default_str();
    gradcheck->add_flag("--pipeline", ga.pipeline, "Check loss ∘ predictor in the parameters (threshold 1e-3)");
    gradcheck->callback([&] { run = [&] { return cmd_gradcheck(ga); }; });

    PointcloudArgs pa;
    auto* pointcloud = app.add_subcommand("pointcloud", "Unproject a depth map to an ASCII PLY point cloud");
    pointcloud->add_option("--depth", pa.depth)->required();
    pointcloud->add_option("--fx", pa.fx)->required();
    pointcloud->add_option("--fy", pa.fy)->required();
    pointcloud->add_option("--cx", pa.cx)->required();
    pointcloud->add_option("--cy", pa.cy)->required();
    pointcloud->add_option("--rgb", pa.rgb, "Binary PPM (P6) colours");
    pointcloud->add_option("--out", pa.out)->required();
    pointcloud->callback([&] { run = [&] { return cmd_pointcloud(pa); }; });

    IngestArgs ia;
    auto* ingest = app.add_subcommand("ingest", "Filter stereo flow and convert it to depth");
    ingest->add_option("--flow-lr-prefix", ia.lr_prefix, "Left-to-right flow, <prefix>.dx.pfm / .dy.pfm")->required();
    ingest->add_option("--flow-rl-prefix", ia.rl_prefix, "Right-to-left flow")->required();
    ingest->add_option("--v-thresh", ia.thresholds.vertical)->capture_default_str();
    ingest->add_option("--lr-thresh", ia.thresholds.left_right)->capture_default_str();
    ingest->add_option("--min-valid", ia.thresholds.min_valid_fraction)->capture_default_str();
    ingest->add_option("--min-disparity", ia.thresholds.min_disparity)->capture_default_str();
    ingest->add_option("--scale", ia.scale, "'median' (median depth 1) or a fixed numerator")->capture_default_str();
    ingest->add_option("--out-depth", ia.out_depth)->required();
    ingest->add_option("--out-report", ia.out_report)->required();
    ingest->callback([&] { run = [&] { return cmd_ingest(ia); }; });

    SynthArgs sa;
    auto* synth = app.add_subcommand("synth", "Generate the synthetic parts and validation set");
    synth->add_option("--config", sa.config)->required();
    synth->add_option("--out-dir", sa.out_dir)->required();
    synth->add_option("--seed", sa.seed, "Re-seed every part from one value");
    synth->callback([&] { run = [&] { return cmd_synth(sa); }; });

    TeachersArgs ta;
    auto* teachers = app.add_subcommand("teachers", "Train one teacher per part and write difficulty scores");
    teachers->add_option("--config", ta.config)->required();
    teachers->add_option("--out", ta.out, "Scores CSV")->required();
    teachers->add_option("--seed", ta.seed);
    teachers->add_flag("--raw", ta.raw, "Score with unaligned Abs-Rel");
    teachers->callback([&] { run = [&] { return cmd_teachers(ta); }; });

    PlanArgs pl;
    auto* plan = app.add_subcommand("plan", "Build a curriculum plan from difficulty scores");
    plan->add_option("--scores", pl.scores)->required();
    plan->add_option("--p", pl.p, "Starting fraction, one value or a comma list per part")->required();
    plan->add_option("--step-len", pl.step_len)->capture_default_str();
    plan->add_option("--batch-size", pl.batch_size)->capture_default_str();
    plan->add_option("--iters", pl.iters)->capture_default_str();
    plan->add_option("--mode", pl.mode)->check(CLI::IsMember(kModeNames))->capture_default_str();
    plan->add_option("--out", pl.out)->required();
    plan->callback([&] { run = [&] { return cmd_plan(pl); }; });

    TrainArgs tr;
    auto* trainc = app.add_subcommand("train", "Train the predictor; writes checkpoint.json and history.csv");
    trainc->add_option("--config", tr.config)->required();
    trainc->add_option("--curriculum", tr.curriculum)->check(CLI::IsMember(kModeNames))->capture_default_str();
    trainc->add_option("--out", tr.out, "Output directory")->required();
    trainc->add_option("--plan", tr.plan, "Plan JSON (otherwise built from --scores or fresh teachers)");
    trainc->add_option("--scores", tr.scores, "Scores CSV");
    trainc->add_option("--loss", tr.loss, "Override the config's loss")->check(CLI::IsMember(kLossNames));
    trainc->add_option("--seed", tr.seed);
    trainc->callback([&] { run = [&] { return cmd_train(tr); }; });

    LossesArgs la;
    auto* losses = app.add_subcommand("losses", "Evaluate one loss on a prediction / ground-truth pair");
    losses->add_option("--pred", la.pred)->required();
    losses->add_option("--gt", la.gt)->required();
    losses->add_option("--loss", la.loss)->check(CLI::IsMember(kLossNames))->capture_default_str();
    losses->add_option("--pairs", la.pairs, "Ordinal pairs CSV (ranking loss)");
    losses->add_option("--fx", la.fx);
    losses->add_option("--fy", la.fy);
    losses->add_option("--cx", la.cx);
    losses->add_option("--cy", la.cy);
    losses->add_option("--lambda", la.lambda)->capture_default_str();
    losses->add_option("--seed", la.seed)->capture_default_str();
    losses->add_option("--grad-out", la.grad_out, "Write the gradient as PFM");
    losses->callback([&] { run = [&] { return cmd_losses(la); }; });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    try {
        return run();
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 3;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
