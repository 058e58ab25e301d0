#include "affdepth/formats.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cstring>
#include <map>
#include <sstream>

#include <json.hpp>

#include "affdepth/error.hpp"
#include "affdepth/io.hpp"

namespace affdepth {
namespace {

using nlohmann::json;

constexpr std::string_view kArchitecture = "conv3x3(3->8)+bias,relu,conv3x3(8->1)+bias,softplus";
constexpr std::string_view kPairsHeader = "i_x,i_y,j_x,j_y,label,weight";
constexpr std::string_view kScoresHeader = "sample_id,part_id,score";

json parse_json(std::string_view text) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("invalid JSON: ") + e.what(), e.byte);
    }
}

template <class T>
T get(const json& j, const char* key) {
    if (!j.contains(key)) throw DataError(std::string("missing key \"") + key + "\"");
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw DataError(std::string("key \"") + key + "\" has the wrong type");
    }
}

template <class T>
T get_or(const json& j, const char* key, T fallback) {
    return j.contains(key) ? get<T>(j, key) : fallback;
}

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

// Splits into lines, dropping '\r' and a trailing empty line.
std::vector<std::string_view> lines_of(std::string_view text) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (start < text.size()) {
        auto end = text.find('\n', start);
        if (end == std::string_view::npos) end = text.size();
        auto line = text.substr(start, end - start);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        out.push_back(line);
        start = end + 1;
    }
    return out;
}

std::vector<std::string_view> fields_of(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        out.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

template <class T>
T parse_field(std::string_view s, std::size_t line_no, const char* what) {
    while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
    while (!s.empty() && s.back() == ' ') s.remove_suffix(1);
    T v{};
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) {
        throw DataError("line " + std::to_string(line_no) + ": bad " + what + " \"" + std::string(s) + "\"");
    }
    return v;
}

void expect_header(const std::vector<std::string_view>& lines, std::string_view header) {
    if (lines.empty() || lines.front() != header) {
        throw DataError("expected CSV header \"" + std::string(header) + "\"");
    }
}

json scene_to_json(const SceneConfig& s) {
    return {{"width", s.width},         {"height", s.height}, {"planes", s.planes}, {"spheres", s.spheres},
            {"boxes", s.boxes},         {"noise_sigma", s.noise_sigma},
            {"affine_range", {{"a", {s.a_min, s.a_max}}, {"b", {s.b_min, s.b_max}}}},
            {"seed", s.seed}};
}

SceneConfig scene_from_json(const json& j) {
    SceneConfig s;
    s.width = get_or(j, "width", s.width);
    s.height = get_or(j, "height", s.height);
    s.planes = get_or(j, "planes", s.planes);
    s.spheres = get_or(j, "spheres", s.spheres);
    s.boxes = get_or(j, "boxes", s.boxes);
    s.noise_sigma = get_or(j, "noise_sigma", s.noise_sigma);
    s.seed = get_or(j, "seed", s.seed);
    if (j.contains("affine_range")) {
        const auto& r = j.at("affine_range");
        const auto a = get<std::vector<double>>(r, "a");
        const auto b = get<std::vector<double>>(r, "b");
        if (a.size() != 2 || b.size() != 2) throw DataError("affine_range intervals need two bounds");
        s.a_min = a[0];
        s.a_max = a[1];
        s.b_min = b[0];
        s.b_max = b[1];
    }
    s.validate();
    return s;
}

}  // namespace

std::string metrics_to_json(const MetricsReport& r) {
    json j;
    j["abs_rel"] = r.abs_rel;
    j["whdr"] = optional_number(r.whdr);
    j["si_rms"] = r.si_rms;
    j["si_hum"] = r.si_masked ? json(r.si_masked->first) : json(nullptr);
    j["si_env"] = r.si_masked ? json(r.si_masked->second) : json(nullptr);
    j["alignment"] = {{"scale", r.alignment.scale}, {"shift", r.alignment.shift}};
    j["n_valid"] = r.n_valid;
    j["pearson_r"] = r.pearson_r;
    return j.dump(2) + "\n";
}

std::vector<WeightedPair> parse_pairs_csv(std::string_view text, int width, int height) {
    const auto lines = lines_of(text);
    expect_header(lines, kPairsHeader);
    std::vector<WeightedPair> out;
    for (std::size_t n = 1; n < lines.size(); ++n) {
        if (lines[n].empty()) continue;
        const auto f = fields_of(lines[n]);
        if (f.size() != 6) throw DataError("line " + std::to_string(n + 1) + ": expected 6 fields");
        const int ix = parse_field<int>(f[0], n + 1, "i_x");
        const int iy = parse_field<int>(f[1], n + 1, "i_y");
        const int jx = parse_field<int>(f[2], n + 1, "j_x");
        const int jy = parse_field<int>(f[3], n + 1, "j_y");
        const int label = parse_field<int>(f[4], n + 1, "label");
        const double weight = parse_field<double>(f[5], n + 1, "weight");
        const auto inside = [&](int x, int y) { return x >= 0 && y >= 0 && x < width && y < height; };
        if (!inside(ix, iy) || !inside(jx, jy)) throw DataError("line " + std::to_string(n + 1) + ": pixel outside grid");
        if (label < -1 || label > 1) throw DataError("line " + std::to_string(n + 1) + ": label must be -1, 0 or 1");
        if (!(weight >= 0.0) || !std::isfinite(weight)) {
            throw DataError("line " + std::to_string(n + 1) + ": weight must be finite and non-negative");
        }
        const auto w = static_cast<std::size_t>(width);
        out.push_back({{static_cast<std::size_t>(iy) * w + ix, static_cast<std::size_t>(jy) * w + jx,
                        static_cast<OrdinalLabel>(label)},
                       weight});
    }
    return out;
}

std::string format_pairs_csv(std::span<const WeightedPair> pairs, int width) {
    std::string out(kPairsHeader);
    out += '\n';
    const auto w = static_cast<std::size_t>(width);
    for (const auto& p : pairs) {
        out += std::to_string(p.pair.i % w) + ',' + std::to_string(p.pair.i / w) + ',' + std::to_string(p.pair.j % w) +
               ',' + std::to_string(p.pair.j / w) + ',' + std::to_string(static_cast<int>(p.pair.label)) + ',' +
               format_number(p.weight) + '\n';
    }
    return out;
}

std::vector<ScoreRow> parse_scores_csv(std::string_view text) {
    const auto lines = lines_of(text);
    expect_header(lines, kScoresHeader);
    std::vector<ScoreRow> out;
    for (std::size_t n = 1; n < lines.size(); ++n) {
        if (lines[n].empty()) continue;
        const auto f = fields_of(lines[n]);
        if (f.size() != 3) throw DataError("line " + std::to_string(n + 1) + ": expected 3 fields");
        ScoreRow row{parse_field<SampleId>(f[0], n + 1, "sample_id"), parse_field<int>(f[1], n + 1, "part_id"),
                     parse_field<double>(f[2], n + 1, "score")};
        if (!std::isfinite(row.score)) throw DataError("line " + std::to_string(n + 1) + ": score must be finite");
        out.push_back(row);
    }
    return out;
}

std::string format_scores_csv(std::span<const ScoreRow> rows) {
    std::string out(kScoresHeader);
    out += '\n';
    for (const auto& r : rows) {
        out += std::to_string(r.sample_id) + ',' + std::to_string(r.part_id) + ',' + format_number(r.score) + '\n';
    }
    return out;
}

std::vector<Part> parts_from_scores(std::span<const ScoreRow> rows) {
    std::map<int, Part> grouped;
    for (const auto& r : rows) {
        auto& part = grouped[r.part_id];
        part.id = r.part_id;
        part.sample_ids.push_back(r.sample_id);
    }
    std::vector<Part> out;
    for (auto& [id, part] : grouped) out.push_back(std::move(part));
    return out;
}

DifficultyScores scores_from_rows(std::span<const ScoreRow> rows) {
    DifficultyScores out;
    for (const auto& r : rows) {
        if (!out.emplace(r.sample_id, r.score).second) {
            throw DataError("duplicate sample id " + std::to_string(r.sample_id) + " in scores");
        }
    }
    return out;
}

std::string plan_to_json(const CurriculumPlan& plan) {
    json orders = json::object();
    for (std::size_t j = 0; j < plan.part_ids.size(); ++j) orders[std::to_string(plan.part_ids[j])] = plan.orders[j];
    json j;
    j["mode"] = mode_name(plan.mode);
    j["p"] = plan.pacing.p;
    j["step_len"] = plan.pacing.step_len;
    j["batch_size"] = plan.pacing.batch_size;
    j["total_iters"] = plan.pacing.total_iters;
    j["orders"] = orders;
    return j.dump(2) + "\n";
}

CurriculumPlan plan_from_json(std::string_view text) {
    const json j = parse_json(text);
    CurriculumPlan plan;
    const auto mode = parse_mode(get<std::string>(j, "mode"));
    if (!mode) throw DataError("unknown curriculum mode");
    plan.mode = *mode;
    plan.pacing.p = get<std::vector<double>>(j, "p");
    plan.pacing.step_len = get<std::size_t>(j, "step_len");
    plan.pacing.batch_size = get<std::size_t>(j, "batch_size");
    plan.pacing.total_iters = get<std::size_t>(j, "total_iters");
    if (!j.contains("orders") || !j.at("orders").is_object()) throw DataError("plan needs an \"orders\" object");
    std::vector<std::pair<int, std::vector<SampleId>>> parts;
    for (const auto& [key, ids] : j.at("orders").items()) {
        int id = 0;
        const auto [ptr, ec] = std::from_chars(key.data(), key.data() + key.size(), id);
        if (ec != std::errc() || ptr != key.data() + key.size()) throw DataError("bad part id \"" + key + "\"");
        try {
            parts.emplace_back(id, ids.get<std::vector<SampleId>>());
        } catch (const json::exception&) {
            throw DataError("orders for part " + key + " must be an array of ids");
        }
    }
    std::sort(parts.begin(), parts.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    for (auto& [id, ids] : parts) {
        plan.part_ids.push_back(id);
        plan.orders.push_back(std::move(ids));
    }
    plan.validate();
    return plan;
}

std::string ingest_report_to_json(const IngestReport& r) {
    json j;
    j["n_total"] = r.n_total;
    j["n_initially_invalid"] = r.n_initially_invalid;
    j["n_removed_vertical"] = r.n_removed_vertical;
    j["n_removed_lr"] = r.n_removed_lr;
    j["n_valid"] = r.n_valid;
    j["valid_fraction"] = r.n_total ? static_cast<double>(r.n_valid) / static_cast<double>(r.n_total) : 0.0;
    j["accepted"] = r.accepted;
    j["n_depth_valid"] = r.n_depth_valid;
    return j.dump(2) + "\n";
}

std::string base64_encode(std::span<const std::uint8_t> bytes) {
    static constexpr char kAlphabet[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
    std::string out;
    out.reserve((bytes.size() + 2) / 3 * 4);
    std::size_t i = 0;
    for (; i + 2 < bytes.size(); i += 3) {
        const std::uint32_t v = (bytes[i] << 16) | (bytes[i + 1] << 8) | bytes[i + 2];
        out += kAlphabet[v >> 18];
        out += kAlphabet[(v >> 12) & 63];
        out += kAlphabet[(v >> 6) & 63];
        out += kAlphabet[v & 63];
    }
    if (i + 1 == bytes.size()) {
        const std::uint32_t v = bytes[i] << 16;
        out += kAlphabet[v >> 18];
        out += kAlphabet[(v >> 12) & 63];
        out += "==";
    } else if (i + 2 == bytes.size()) {
        const std::uint32_t v = (bytes[i] << 16) | (bytes[i + 1] << 8);
        out += kAlphabet[v >> 18];
        out += kAlphabet[(v >> 12) & 63];
        out += kAlphabet[(v >> 6) & 63];
        out += '=';
    }
    return out;
}

std::vector<std::uint8_t> base64_decode(std::string_view text) {
    const auto value = [](char c) -> int {
        if (c >= 'A' && c <= 'Z') return c - 'A';
        if (c >= 'a' && c <= 'z') return c - 'a' + 26;
        if (c >= '0' && c <= '9') return c - '0' + 52;
        if (c == '+') return 62;
        if (c == '/') return 63;
        return -1;
    };
    if (text.size() % 4 != 0) throw DataError("base64 length is not a multiple of 4");
    std::vector<std::uint8_t> out;
    out.reserve(text.size() / 4 * 3);
    for (std::size_t i = 0; i < text.size(); i += 4) {
        const bool last = i + 4 == text.size();
        int pad = 0;
        std::uint32_t v = 0;
        for (std::size_t k = 0; k < 4; ++k) {
            const char c = text[i + k];
            if (c == '=' && last && k >= 2) {
                ++pad;
                v <<= 6;
                continue;
            }
            const int d = value(c);
            if (d < 0 || pad > 0) throw ParseError("invalid base64 character", i + k);
            v = (v << 6) | static_cast<std::uint32_t>(d);
        }
        out.push_back(static_cast<std::uint8_t>(v >> 16));
        if (pad < 2) out.push_back(static_cast<std::uint8_t>((v >> 8) & 0xff));
        if (pad < 1) out.push_back(static_cast<std::uint8_t>(v & 0xff));
    }
    return out;
}

std::string checkpoint_to_json(const Checkpoint& ckpt) {
    const auto params = ckpt.model.params();
    std::vector<std::uint8_t> bytes(params.size() * 8);
    for (std::size_t i = 0; i < params.size(); ++i) {
        const auto bits = std::bit_cast<std::uint64_t>(params[i]);
        for (int b = 0; b < 8; ++b) bytes[i * 8 + b] = static_cast<std::uint8_t>(bits >> (8 * b));
    }
    json j;
    j["architecture"] = {{"name", kArchitecture},
                         {"in_channels", ToyPredictor::kIn},
                         {"hidden_channels", ToyPredictor::kHidden},
                         {"kernel", 3},
                         {"param_count", ToyPredictor::kParamCount}};
    j["params"] = base64_encode(bytes);
    j["seed"] = ckpt.seed;
    j["iteration"] = ckpt.iteration;
    return j.dump(2) + "\n";
}

Checkpoint checkpoint_from_json(std::string_view text) {
    const json j = parse_json(text);
    if (!j.contains("architecture")) throw DataError("checkpoint lacks an architecture descriptor");
    const auto& arch = j.at("architecture");
    if (get<std::string>(arch, "name") != kArchitecture ||
        get<std::size_t>(arch, "param_count") != ToyPredictor::kParamCount) {
        throw DataError("checkpoint architecture does not match this build");
    }
    const auto bytes = base64_decode(get<std::string>(j, "params"));
    if (bytes.size() != ToyPredictor::kParamCount * 8) throw DataError("checkpoint parameter payload has wrong length");
    std::vector<double> params(ToyPredictor::kParamCount);
    for (std::size_t i = 0; i < params.size(); ++i) {
        std::uint64_t bits = 0;
        for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(bytes[i * 8 + b]) << (8 * b);
        params[i] = std::bit_cast<double>(bits);
    }
    return {ToyPredictor(std::move(params)), get<std::uint64_t>(j, "seed"), get<std::size_t>(j, "iteration")};
}

std::string format_history_csv(std::span<const HistoryRow> rows) {
    std::string out = "iter,lr,train_loss,val_abs_rel\n";
    for (const auto& r : rows) {
        out += std::to_string(r.iter) + ',' + format_number(r.lr) + ',' + format_number(r.train_loss) + ',';
        if (r.val_abs_rel) out += format_number(*r.val_abs_rel);
        out += '\n';
    }
    return out;
}

ExperimentConfig experiment_from_json(std::string_view text) {
    const json j = parse_json(text);
    ExperimentConfig cfg;
    if (!j.contains("parts") || !j.at("parts").is_array() || j.at("parts").empty()) {
        throw DataError("config needs a non-empty \"parts\" array");
    }
    for (const auto& p : j.at("parts")) cfg.parts.push_back(scene_from_json(p));
    cfg.n_per_part = get_or(j, "n_per_part", cfg.n_per_part);
    cfg.n_val_per_part = get_or(j, "n_val_per_part", cfg.n_val_per_part);
    cfg.teacher_iterations = get_or(j, "teacher_iterations", cfg.teacher_iterations);
    cfg.step_len = get_or(j, "step_len", cfg.step_len);
    cfg.p = get_or(j, "p", std::vector<double>(cfg.parts.size(), 0.2));
    if (cfg.n_per_part == 0) throw DataError("n_per_part must be positive");

    if (j.contains("train")) {
        const auto& t = j.at("train");
        auto& tc = cfg.train;
        tc.lr0 = get_or(t, "lr0", tc.lr0);
        tc.decay_ratio = get_or(t, "decay_ratio", tc.decay_ratio);
        tc.decay_interval = get_or(t, "decay_interval", tc.decay_interval);
        tc.batch_size = get_or(t, "batch_size", tc.batch_size);
        tc.iterations = get_or(t, "iterations", tc.iterations);
        if (t.contains("loss")) {
            const auto loss = parse_loss(get<std::string>(t, "loss"));
            if (!loss) throw DataError("unknown loss \"" + get<std::string>(t, "loss") + "\"");
            tc.loss = *loss;
        }
        tc.lambda = get_or(t, "lambda", tc.lambda);
        tc.augment = get_or(t, "augment", tc.augment);
        tc.crop = get_or(t, "crop", tc.crop);
        tc.ranking_pairs = get_or(t, "ranking_pairs", tc.ranking_pairs);
        tc.val_every = get_or(t, "val_every", tc.val_every);
        tc.seed = get_or(t, "seed", tc.seed);
    }
    cfg.train.validate();
    if (cfg.train.batch_size % cfg.parts.size() != 0) {
        throw DataError("batch_size must be divisible by the number of parts");
    }
    if (cfg.p.size() != cfg.parts.size()) throw DataError("\"p\" needs one entry per part");
    return cfg;
}

std::string experiment_to_json(const ExperimentConfig& cfg) {
    json parts = json::array();
    for (const auto& p : cfg.parts) parts.push_back(scene_to_json(p));
    const auto& t = cfg.train;
    json j;
    j["parts"] = parts;
    j["n_per_part"] = cfg.n_per_part;
    j["n_val_per_part"] = cfg.n_val_per_part;
    j["teacher_iterations"] = cfg.teacher_iterations;
    j["p"] = cfg.p;
    j["step_len"] = cfg.step_len;
    j["train"] = {{"lr0", t.lr0},
                  {"decay_ratio", t.decay_ratio},
                  {"decay_interval", t.decay_interval},
                  {"batch_size", t.batch_size},
                  {"iterations", t.iterations},
                  {"loss", loss_name(t.loss)},
                  {"lambda", t.lambda},
                  {"augment", t.augment},
                  {"crop", t.crop},
                  {"ranking_pairs", t.ranking_pairs},
                  {"val_every", t.val_every},
                  {"seed", t.seed}};
    return j.dump(2) + "\n";
}

}  // namespace affdepth
