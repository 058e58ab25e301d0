#include <doctest.h>

#include <algorithm>

#include "affdepth/error.hpp"
#include "affdepth/ingest.hpp"
#include "generators.hpp"

using namespace affdepth;

namespace {

FlowField field(int w, int h, std::vector<double> dx, std::vector<double> dy) {
    const auto n = dx.size();
    return {w, h, std::move(dx), std::move(dy), Mask(n, 1)};
}

FlowField constant_field(int w, int h, double dx, double dy) {
    const auto n = static_cast<std::size_t>(w) * h;
    return field(w, h, std::vector<double>(n, dx), std::vector<double>(n, dy));
}

// Random stereo fields: integer left disparities, arbitrary right ones.
std::pair<FlowField, FlowField> stereo_pair(gen::Rng& rng, int w, int h) {
    const auto n = static_cast<std::size_t>(w) * h;
    FlowField left = constant_field(w, h, 0, 0);
    FlowField right = constant_field(w, h, 0, 0);
    for (std::size_t i = 0; i < n; ++i) {
        left.dx[i] = -static_cast<double>(gen::dim(rng, 1, 4));
        left.dy[i] = uniform(rng, -8, 8);
        right.dx[i] = uniform(rng, 1, 4);
        right.dy[i] = uniform(rng, -8, 8);
        if (uniform01(rng) < 0.1) left.mask[i] = 0;
        if (uniform01(rng) < 0.1) right.mask[i] = 0;
    }
    return {left, right};
}

bool mask_subset(const Mask& sub, const Mask& super) {
    for (std::size_t i = 0; i < sub.size(); ++i) {
        if (sub[i] && !super[i]) return false;
    }
    return true;
}

}  // namespace

TEST_CASE("vertical filter") {
    CHECK(vertical_filter(constant_field(3, 2, 1, 5)).mask == Mask(6, 1));
    CHECK(vertical_filter(constant_field(3, 2, 1, 0)).mask == Mask(6, 1));
    const auto f = vertical_filter(field(4, 1, {1, 1, 1, 1}, {0, 5.01, -6, 3}));
    CHECK(f.mask == Mask{1, 0, 0, 1});
    CHECK(vertical_filter(field(2, 1, {1, 1}, {1, 2}), 1.5).mask == Mask{1, 0});
}

TEST_CASE("left-right consistency") {
    SUBCASE("consistent pair keeps everything") {
        // Every left pixel matches two to the left; the right field points back.
        auto left = constant_field(6, 2, -2, 0);
        auto right = constant_field(6, 2, 2, 0);
        left.mask[0] = left.mask[1] = left.mask[6] = left.mask[7] = 0;
        CHECK(lr_consistency_filter(left, right).mask == left.mask);
    }
    SUBCASE("out of bounds match is removed") {
        const auto left = constant_field(3, 1, -2, 0);
        const auto right = constant_field(3, 1, 2, 0);
        CHECK(lr_consistency_filter(left, right).mask == Mask{0, 0, 1});
    }
    SUBCASE("forward-backward gap above the threshold") {
        auto left = field(12, 1, std::vector<double>(12, 0.0), std::vector<double>(12, 0.0));
        auto right = left;
        left.dx[11] = -10;
        right.dx[1] = 12.5;
        const auto out = lr_consistency_filter(left, right);
        CHECK_FALSE(out.mask[11]);
        right.dx[1] = 12.0;
        CHECK(lr_consistency_filter(left, right).mask[11]);
    }
    SUBCASE("invalid right match removes the pixel") {
        const auto left = constant_field(3, 1, 0, 0);
        auto right = left;
        right.mask[1] = 0;
        CHECK(lr_consistency_filter(left, right).mask == Mask{1, 0, 1});
    }
    SUBCASE("matches are rounded to the nearest pixel") {
        auto left = constant_field(4, 3, 0, 0);
        auto right = left;
        left.dx[0] = 1.4;
        left.dy[0] = 1.6;  // lands on (1, 2)
        right.dx[2 * 4 + 1] = -1.4;
        right.mask[1 * 4 + 1] = 0;
        CHECK(lr_consistency_filter(left, right).mask[0]);
    }
    CHECK_THROWS_AS(lr_consistency_filter(constant_field(2, 2, 0, 0), constant_field(2, 3, 0, 0)), DataError);
}

TEST_CASE("filters shrink the valid set and are idempotent") {
    gen::forall(40, 51, [](gen::Rng& rng, std::size_t) {
        auto [left, right] = stereo_pair(rng, gen::dim(rng, 2, 16), gen::dim(rng, 2, 16));
        const auto v1 = vertical_filter(left);
        CHECK(mask_subset(v1.mask, left.mask));
        CHECK(vertical_filter(v1).mask == v1.mask);
        const auto l1 = lr_consistency_filter(left, right);
        CHECK(mask_subset(l1.mask, left.mask));
        CHECK(lr_consistency_filter(l1, right).mask == l1.mask);
        CHECK(l1.dx == left.dx);
    });
}

TEST_CASE("validity gate") {
    CHECK(validity_gate(constant_field(4, 4, 1, 0)).accepted);
    auto f = constant_field(10, 10, 1, 0);
    std::fill(f.mask.begin() + 30, f.mask.end(), 0);
    auto r = validity_gate(f);
    CHECK(r.accepted);
    CHECK(r.n_valid == 30);
    CHECK(r.n_total == 100);
    f.mask[29] = 0;
    CHECK_FALSE(validity_gate(f).accepted);
}

TEST_CASE("disparity to depth") {
    const auto d = disparity_to_depth(constant_field(3, 3, 4, 0));
    for (std::size_t i = 0; i < d.size(); ++i) CHECK(d[i] == 1.0);
    CHECK(disparity_to_depth(constant_field(1, 1, -4, 0), DepthScale::fixed(8))[0] == 2.0);

    const auto m = disparity_to_depth(field(3, 1, {1, -2, 4}, {0, 0, 0}));
    CHECK(m[0] == 2.0);
    CHECK(m[1] == 1.0);
    CHECK(m[2] == 0.5);

    const auto cut = disparity_to_depth(field(3, 1, {1, 1e-4, -1e-3}, {0, 0, 0}));
    CHECK(cut.valid(0));
    CHECK_FALSE(cut.valid(1));
    CHECK_FALSE(cut.valid(2));

    CHECK_THROWS_AS(disparity_to_depth(constant_field(2, 1, 0, 0)), DataError);
    CHECK_THROWS_AS(disparity_to_depth(constant_field(2, 1, 1, 0), DepthScale::fixed(-1)), DataError);

    SUBCASE("round trip through disparity") {
        gen::forall(30, 52, [](gen::Rng& rng, std::size_t) {
            const int w = gen::dim(rng, 1, 12), h = gen::dim(rng, 1, 12);
            const auto depth = gen::depth(rng, w, h, 0.1, 50, 0.1);
            if (depth.count_valid() == 0) return;
            const double s = uniform(rng, 0.5, 100);
            auto f = constant_field(w, h, 0, 0);
            for (std::size_t i = 0; i < depth.size(); ++i) {
                f.mask[i] = depth.mask()[i];
                if (depth.valid(i)) f.dx[i] = (uniform01(rng) < 0.5 ? -1.0 : 1.0) * s / depth[i];
            }
            const auto back = disparity_to_depth(f, DepthScale::fixed(s));
            for (std::size_t i = 0; i < depth.size(); ++i) {
                CHECK(back.valid(i) == depth.valid(i));
                if (depth.valid(i)) CHECK(gen::rel_change(back[i], depth[i]) < 1e-9);
            }
            const auto med = disparity_to_depth(f);
            std::vector<double> v;
            for (std::size_t i = 0; i < med.size(); ++i) {
                if (med.valid(i)) v.push_back(med[i]);
            }
            std::sort(v.begin(), v.end());
            const auto n = v.size();
            const double median = n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
            // Median of depths equals 1 exactly only for odd counts; the even case
            // normalises the median inverse disparity instead.
            if (n % 2) CHECK(median == doctest::Approx(1.0).epsilon(1e-12));
        });
    }
}

TEST_CASE("ingest pipeline") {
    SUBCASE("clean field is accepted") {
        const auto r = ingest_pipeline(constant_field(8, 4, -2, 0.4), constant_field(8, 4, 2, 0));
        CHECK(r.report.accepted);
        REQUIRE(r.depth);
        CHECK(r.report.n_removed_lr == 8);  // the two leftmost columns match out of bounds
        CHECK(r.depth->count_valid() == 24);
        CHECK((*r.depth)(5, 2) == 1.0);
    }
    SUBCASE("vertical outliers reject the image") {
        auto left = constant_field(10, 10, 0.5, 0);
        for (std::size_t i = 0; i < 80; ++i) left.dy[i] = 9;
        auto right = constant_field(10, 10, -0.5, 0);
        const auto r = ingest_pipeline(left, right);
        CHECK_FALSE(r.report.accepted);
        CHECK_FALSE(r.depth);
        CHECK(r.report.n_removed_vertical == 80);
    }
    SUBCASE("a pixel failing both filters counts once, under vertical") {
        auto left = constant_field(3, 1, 1, 0);
        left.dx[2] = 5;  // out of bounds
        left.dy[2] = 10;
        const auto r = ingest_pipeline(left, constant_field(3, 1, -1, 0));
        CHECK(r.report.n_removed_vertical == 1);
        CHECK(r.report.n_removed_lr == 0);
    }
    SUBCASE("counts reconcile") {
        gen::forall(40, 53, [](gen::Rng& rng, std::size_t) {
            auto [left, right] = stereo_pair(rng, gen::dim(rng, 2, 16), gen::dim(rng, 2, 16));
            const IngestThresholds th{uniform(rng, 1, 8), uniform(rng, 0.5, 3), uniform(rng, 0.05, 0.6), 1e-3};
            IngestResult r;
            try {
                r = ingest_pipeline(left, right, th);
            } catch (const DataError&) {
                return;  // every surviving disparity below the cutoff
            }
            const auto& rep = r.report;
            CHECK(rep.n_total == left.size());
            CHECK(rep.n_total == rep.n_valid + rep.n_removed_vertical + rep.n_removed_lr + rep.n_initially_invalid);
            CHECK(rep.accepted == (static_cast<double>(rep.n_valid) >= th.min_valid_fraction * rep.n_total));
            CHECK(rep.accepted == r.depth.has_value());
            if (r.depth) CHECK(r.depth->count_valid() == rep.n_depth_valid);
        });
    }
}
