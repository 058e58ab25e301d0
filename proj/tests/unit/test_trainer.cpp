#include <doctest.h>

#include <bit>
#include <cmath>

#include "affdepth/error.hpp"
#include "affdepth/trainer.hpp"
#include "generators.hpp"

using namespace affdepth;

namespace {

std::vector<SceneConfig> small_configs() {
    std::vector<SceneConfig> cfgs(3);
    for (std::size_t j = 0; j < 3; ++j) {
        cfgs[j].width = 16;
        cfgs[j].height = 16;
        cfgs[j].planes = 1 + static_cast<int>(j);
        cfgs[j].spheres = j == 2 ? 1 : 0;
        cfgs[j].noise_sigma = 0.5 * static_cast<double>(j);
        cfgs[j].a_min = 0.5;
        cfgs[j].a_max = 2.0;
        cfgs[j].b_max = 1.0;
        cfgs[j].seed = 10 + j;
    }
    return cfgs;
}

TrainConfig small_train(std::size_t iters) {
    TrainConfig c;
    c.iterations = iters;
    c.batch_size = 3;
    c.val_every = 4;
    c.decay_interval = 3;
    c.decay_ratio = 0.5;
    c.seed = 2;
    return c;
}

bool same_params(const ToyPredictor& a, const ToyPredictor& b) {
    for (std::size_t i = 0; i < ToyPredictor::kParamCount; ++i) {
        if (std::bit_cast<std::uint64_t>(a.params()[i]) != std::bit_cast<std::uint64_t>(b.params()[i])) return false;
    }
    return true;
}

// Sample whose true depth encodes its pixel: 1 + x + 1000 y.
Sample coded_sample(int w, int h) {
    Sample s;
    s.image = Image(w, h);
    std::vector<double> v;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            v.push_back(1.0 + x + 1000.0 * y);
            s.image.at(0, x, y) = x;
            s.image.at(1, x, y) = y;
        }
    }
    s.gt_true = DepthMap::from_values(w, h, v);
    s.gt_stored = s.gt_true;
    s.intrinsics = {30, 20, 0.5 * (w - 1) + 0.3, 0.5 * (h - 1) - 0.2};
    return s;
}

}  // namespace

TEST_CASE("config validation and learning-rate schedule") {
    TrainConfig c;
    CHECK_NOTHROW(c.validate());
    CHECK(c.lr0 == 5e-4);
    CHECK(c.decay_ratio == 0.9);
    c.decay_interval = 10;
    CHECK(c.lr_at(0) == 5e-4);
    CHECK(c.lr_at(9) == 5e-4);
    CHECK(c.lr_at(10) == 5e-4 * 0.9);
    CHECK(c.lr_at(25) == 5e-4 * std::pow(0.9, 2.0));

    const auto bad = [](auto mutate) {
        TrainConfig t;
        mutate(t);
        return t;
    };
    CHECK_THROWS_AS(bad([](TrainConfig& t) { t.lr0 = -1; }).validate(), DataError);
    CHECK_THROWS_AS(bad([](TrainConfig& t) { t.decay_ratio = 0; }).validate(), DataError);
    CHECK_THROWS_AS(bad([](TrainConfig& t) { t.decay_ratio = 1.1; }).validate(), DataError);
    CHECK_THROWS_AS(bad([](TrainConfig& t) { t.decay_interval = 0; }).validate(), DataError);
    CHECK_THROWS_AS(bad([](TrainConfig& t) { t.batch_size = 0; }).validate(), DataError);
    CHECK_THROWS_AS(bad([](TrainConfig& t) {
                        t.augment = true;
                        t.crop = 2;
                    }).validate(),
                    DataError);
}

TEST_CASE("augmentation keeps image, labels and intrinsics consistent") {
    gen::forall(60, 71, [](gen::Rng& rng, std::size_t) {
        const int w = gen::dim(rng, 6, 30), h = gen::dim(rng, 6, 30);
        const auto s = coded_sample(w, h);
        const int crop = gen::dim(rng, 3, 40);
        const auto a = augment_sample(s, rng, crop);
        CHECK(a.image.width == a.gt_true.width());
        CHECK(a.gt_stored.width() == a.gt_true.width());
        CHECK(a.gt_true.width() <= crop);
        CHECK(a.gt_true.height() <= crop);
        const double sx = a.intrinsics.fx / s.intrinsics.fx, sy = a.intrinsics.fy / s.intrinsics.fy;
        CHECK(sx >= 0.5 - 1.0 / w);
        CHECK(sx <= 1.5 + 1.0 / w);
        CHECK(sy >= 0.5 - 1.0 / h);
        const auto src_of = [&](int x, int y) {
            const double code = a.gt_true(x, y) - 1.0;
            const double src_y = std::floor(code / 1000.0);
            return std::pair{code - 1000.0 * src_y, src_y};
        };
        const int ow = a.gt_true.width();
        const bool flipped = src_of(ow - 1, 0).first < src_of(0, 0).first;
        for (int y = 0; y < a.gt_true.height(); ++y) {
            for (int x = 0; x < ow; ++x) {
                const auto [src_x, src_y] = src_of(x, y);
                // The new camera's ray through (x, y), mirrored back when the
                // view was flipped, lands within half a pixel of the source pixel.
                const double rx = (x - a.intrinsics.cx) / a.intrinsics.fx;
                const double u = (flipped ? -rx : rx) * s.intrinsics.fx + s.intrinsics.cx;
                const double v = (y - a.intrinsics.cy) / a.intrinsics.fy * s.intrinsics.fy + s.intrinsics.cy;
                CHECK(std::abs(u - src_x) <= 0.5 + 1e-9);
                CHECK(std::abs(v - src_y) <= 0.5 + 1e-9);
                CHECK(a.image.at(0, x, y) == src_x);
                CHECK(a.image.at(1, x, y) == src_y);
                CHECK(a.gt_stored(x, y) == a.gt_true(x, y));
            }
        }
    });
}

TEST_CASE("training") {
    const auto cfgs = small_configs();
    const auto parts = gen_parts(cfgs, 4);
    const auto val = gen_validation(cfgs, 1, 100);

    SUBCASE("zero iterations return the initial model") {
        const auto cfg = small_train(0);
        const auto init = ToyPredictor::initialize(77);
        const auto r = train(parts, val, uniform_plan(parts, cfg), cfg, init);
        CHECK(same_params(r.model, init));
        CHECK(r.history.empty());
        CHECK_FALSE(r.final_val_abs_rel());
    }
    SUBCASE("zero learning rate leaves parameters unchanged") {
        auto cfg = small_train(8);
        cfg.lr0 = 0;
        const auto init = ToyPredictor::initialize(78);
        const auto r = train(parts, val, uniform_plan(parts, cfg), cfg, init);
        CHECK(same_params(r.model, init));
        REQUIRE(r.history.size() == 8);
        for (const auto& row : r.history) CHECK(row.lr == 0.0);
        CHECK(r.history[3].val_abs_rel == r.history[7].val_abs_rel);
        CHECK(*r.final_val_abs_rel() == validation_abs_rel(init, val));
    }
    SUBCASE("history records the schedule and validation cadence") {
        const auto cfg = small_train(10);
        const auto r = train(parts, val, uniform_plan(parts, cfg), cfg);
        REQUIRE(r.history.size() == 10);
        for (std::size_t i = 0; i < 10; ++i) {
            CHECK(r.history[i].iter == i);
            CHECK(r.history[i].lr == cfg.lr_at(i));
            CHECK(std::isfinite(r.history[i].train_loss));
            CHECK(r.history[i].val_abs_rel.has_value() == (i == 3 || i == 7 || i == 9));
        }
        CHECK(r.final_val_abs_rel() == r.history[9].val_abs_rel);
        CHECK_FALSE(same_params(r.model, ToyPredictor::initialize(0)));

        const auto none = train(parts, {}, uniform_plan(parts, cfg), cfg);
        for (const auto& row : none.history) CHECK_FALSE(row.val_abs_rel);
    }
    SUBCASE("identical seeds give bit-identical models") {
        for (auto kind : {LossKind::combined, LossKind::ranking, LossKind::mse}) {
            auto cfg = small_train(6);
            cfg.loss = kind;
            cfg.augment = true;
            cfg.crop = 12;
            const auto a = train(parts, val, uniform_plan(parts, cfg), cfg);
            const auto b = train(parts, val, uniform_plan(parts, cfg), cfg);
            CHECK(same_params(a.model, b.model));
            cfg.seed += 1;
            const auto c = train(parts, val, uniform_plan(parts, cfg), cfg);
            CHECK_FALSE(same_params(a.model, c.model));
        }
    }
    SUBCASE("different curricula draw different batches") {
        auto cfg = small_train(6);
        DifficultyScores scores;
        for (const auto& p : parts) {
            for (const auto& s : p.samples) scores[s.id] = static_cast<double>(s.id % 5);
        }
        std::vector<Part> ps;
        for (const auto& p : parts) ps.push_back(p.part());
        const PacingConfig pacing{{0.25, 0.25, 0.25}, 100, 3, cfg.iterations};
        const auto mcl = train(parts, val, make_plan(ps, scores, pacing, CurriculumMode::mcl), cfg);
        const auto rev = train(parts, val, make_plan(ps, scores, pacing, CurriculumMode::mcl_r), cfg);
        CHECK_FALSE(same_params(mcl.model, rev.model));
    }
    SUBCASE("plan and parts must agree") {
        auto cfg = small_train(2);
        auto plan = uniform_plan(parts, cfg);
        plan.orders[0].push_back(12345);
        CHECK_THROWS_AS(train(parts, val, plan, cfg), DataError);
        cfg.batch_size = 4;
        CHECK_THROWS_AS(uniform_plan(parts, cfg), DataError);
    }
    SUBCASE("divergence is reported") {
        auto cfg = small_train(50);
        cfg.loss = LossKind::mse;
        cfg.lr0 = 1e6;
        CHECK_THROWS_AS(train(parts, val, uniform_plan(parts, cfg), cfg), NumericalError);
    }
}

TEST_CASE("teachers score their own parts") {
    const auto cfgs = small_configs();
    const auto parts = gen_parts(cfgs, 3);
    auto cfg = small_train(4);
    const auto t = train_teachers(parts, cfg);
    CHECK(t.teachers.size() == 3);
    CHECK(t.scores.size() == 9);
    for (const auto& [id, score] : t.scores) {
        CHECK(score >= 0.0);
        CHECK(std::isfinite(score));
    }
    const auto again = train_teachers(parts, cfg);
    CHECK(again.scores == t.scores);
}

TEST_CASE("sample_loss dispatches every loss") {
    gen::Rng rng(72);
    const auto g = gen::depth(rng, 12, 12);
    const auto d = gen::depth(rng, 12, 12);
    const auto k = gen::centered(12, 12);
    CHECK(sample_loss(LossKind::mse, d, g, k, 1, 0).value == mse_loss(d, g).value);
    CHECK(sample_loss(LossKind::ssi, d, g, k, 1, 0).value == ssi_loss(d, g).value);
    CHECK(sample_loss(LossKind::sn, d, g, k, 1, 0).value == surface_normal_loss(d, g, k).value);
    const auto cfg = TripletConfig::defaults_for(g.count_valid(), 5);
    CHECK(sample_loss(LossKind::vnl, d, g, k, 1, 5).value == virtual_normal_loss(d, g, k, cfg).value);
    CHECK(sample_loss(LossKind::combined, d, g, k, 0.5, 5).value == combined_loss(d, g, k, cfg, 0.5).value);
    const auto r = sample_loss(LossKind::ranking, d, g, k, 1, 5, 64);
    CHECK(r.value > 0.0);
    CHECK(sample_loss(LossKind::ranking, d, g, k, 1, 5, 64).value == r.value);
    CHECK(sample_loss(LossKind::ranking, g, g, k, 1, 5, 64).value < r.value);
}
