#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "csattn/infer.hpp"
#include "csattn/net.hpp"

using namespace csattn;

namespace {

NetConfig desk_net() {
    NetConfig cfg;
    cfg.base_channels = 8;
    cfg.blocks = {1, 1, 2};
    cfg.csattn.base_heads = 1;
    return cfg;
}

}  // namespace

TEST_CASE("channel doubling per level") {
    NetConfig cfg;
    cfg.base_channels = 32;
    CHECK(cfg.level_channels(1) == 32);
    CHECK(cfg.level_channels(2) == 64);
    CHECK(cfg.level_channels(3) == 128);
}

TEST_CASE("build is deterministic per seed") {
    const NetConfig cfg = desk_net();
    Net<float> a = build_net<float>(cfg, 42);
    Net<float> b = build_net<float>(cfg, 42);
    Net<float> c = build_net<float>(cfg, 43);
    REQUIRE(a.params.count() == b.params.count());
    bool all_equal = true, any_diff_seed = false;
    for (std::size_t i = 0; i < a.params.count(); ++i) {
        all_equal = all_equal && bitwise_equal(a.params.tensors[i], b.params.tensors[i]);
        any_diff_seed = any_diff_seed || !bitwise_equal(a.params.tensors[i], c.params.tensors[i]);
    }
    CHECK(all_equal);
    CHECK(any_diff_seed);
}

TEST_CASE("desk config runs forward with the multi-scale output contract") {
    const NetConfig cfg = desk_net();
    Net<double> net = build_net<double>(cfg, 7);
    Rng rng(1);
    Tensor<double> img = rng.uniform_tensor<double>({1, 3, 64, 64}, 0, 1);

    Tape<double> tape;
    auto leaves = make_leaves(tape, net.params, false);
    NetOutputs<double> out = forward_multiscale(tape.leaf(img), net.idx, leaves, cfg);
    CHECK(tape.val(out.full).shape == Shape{1, 3, 64, 64});
    CHECK(tape.val(out.half).shape == Shape{1, 3, 32, 32});
    CHECK(tape.val(out.quarter).shape == Shape{1, 3, 16, 16});

    Tensor<double> bad = Tensor<double>::zeros(Shape{1, 3, 24, 24});
    CHECK_THROWS(forward_multiscale(tape.leaf(bad), net.idx, leaves, cfg));
}

TEST_CASE("zeroed residual heads reproduce the input pyramid exactly") {
    const NetConfig cfg = desk_net();
    Net<double> net = build_net<double>(cfg, 11);
    for (const char* head : {"head1", "head2", "head4"}) {
        for (const char* part : {".weight", ".bias"}) {
            const std::int64_t i = net.params.find(std::string(head) + part);
            REQUIRE(i >= 0);
            auto& t = net.params.tensors[static_cast<std::size_t>(i)];
            std::fill(t.data.begin(), t.data.end(), 0.0);
        }
    }
    Rng rng(2);
    Tensor<double> img = rng.uniform_tensor<double>({1, 3, 32, 32}, 0, 1);
    Tape<double> tape;
    auto leaves = make_leaves(tape, net.params, false);
    NetOutputs<double> out = forward_multiscale(tape.leaf(img), net.idx, leaves, cfg);
    CHECK(bitwise_equal(tape.val(out.full), img));
    CHECK(bitwise_equal(tape.val(out.half), downsample_area_tensor(img, 2)));
    CHECK(bitwise_equal(tape.val(out.quarter), downsample_area_tensor(img, 4)));
}

TEST_CASE("analytic parameter count matches the built store") {
    // two independent routes: formula sheet vs exact tensor-element sum
    std::vector<NetConfig> cases;
    cases.push_back(desk_net());
    {
        NetConfig c = desk_net();
        c.csattn.use_value_nta = false;
        cases.push_back(c);
    }
    {
        NetConfig c = desk_net();
        c.csattn.use_aggregation = false;
        cases.push_back(c);
    }
    {
        NetConfig c = desk_net();
        c.csattn.baseline_stacked = true;
        cases.push_back(c);
    }
    {
        NetConfig c = desk_net();
        c.csattn.attention_count = 1;
        c.blocks = {2, 1, 1};
        cases.push_back(c);
    }
    for (const auto& cfg : cases) {
        Net<float> net = build_net<float>(cfg, 3);
        CHECK(count_flops(cfg, 32, 32).params == count_params(net.params));
    }
}

TEST_CASE("single point-wise conv parameter formula") {
    CHECK(conv_param_count(3, 2, 1, true) == 9);  // 2*3 weights + 3 biases
    CHECK(conv_param_count(3, 2, 1, false) == 6);
}

TEST_CASE("flops are linear in the pixel count") {
    const NetConfig cfg = desk_net();
    const CostReport a = count_flops(cfg, 32, 32);
    const CostReport b = count_flops(cfg, 64, 32);
    CHECK(b.flops == 2 * a.flops);
    CHECK(b.attn_score_flops == 2 * a.attn_score_flops);
    CHECK(b.attn_apply_flops == 2 * a.attn_apply_flops);
}

TEST_CASE("stage-2 and stage-3 score-term ratios are exact") {
    CSAttnConfig bc;
    bc.channels = 32;
    bc.base_heads = 2;
    CHECK(attention_score_flops(bc, 2, 64, 64, false) % attention_score_flops(bc, 2, 64, 64, true) == 0);
    CHECK(attention_score_flops(bc, 2, 64, 64, false) / attention_score_flops(bc, 2, 64, 64, true) == 4);
    CHECK(attention_score_flops(bc, 3, 64, 64, false) / attention_score_flops(bc, 3, 64, 64, true) == 16);
    // the apply term is resolution-bound to V and does not shrink
    const BlockCost scaled = block_cost(bc, 64, 64);
    CSAttnConfig noscale = bc;
    noscale.use_spatial_scaling = false;
    const BlockCost unscaled = block_cost(noscale, 64, 64);
    CHECK(scaled.attn_apply_flops == unscaled.attn_apply_flops);
    CHECK(unscaled.attn_score_flops > scaled.attn_score_flops);
}

TEST_CASE("parameter count grows strictly with each level's block count") {
    const NetConfig base = desk_net();
    const std::int64_t p0 = count_flops(base, 32, 32).params;
    for (int axis = 0; axis < 3; ++axis) {
        NetConfig more = base;
        more.blocks[static_cast<std::size_t>(axis)] += 1;
        CHECK(count_flops(more, 32, 32).params > p0);
    }
}

TEST_CASE("ablation-row cost deltas have the expected signs") {
    const NetConfig full = desk_net();
    const CostReport base = count_flops(full, 32, 32);

    auto variant = [&](auto mutate) {
        NetConfig c = full;
        mutate(c.csattn);
        return count_flops(c, 32, 32);
    };

    // (a) activation off and (e) residual off: cost-identical to full
    const CostReport row_a = variant([](CSAttnConfig& c) { c.use_nonlinear_activation = false; });
    CHECK(row_a.params == base.params);
    CHECK(row_a.flops == base.flops);
    const CostReport row_e = variant([](CSAttnConfig& c) { c.intra_residual = false; });
    CHECK(row_e.params == base.params);
    CHECK(row_e.flops == base.flops);

    // (b) and (c): strictly cheaper in both params and flops
    const CostReport row_b = variant([](CSAttnConfig& c) { c.use_value_nta = false; });
    CHECK(row_b.params < base.params);
    CHECK(row_b.flops < base.flops);
    const CostReport row_c = variant([](CSAttnConfig& c) { c.use_aggregation = false; });
    CHECK(row_c.params < base.params);
    CHECK(row_c.flops < base.flops);

    // (d) w/o progressive heads: per-head temperatures shed exactly 2N alpha
    // entries per block, and halving the stage-2/3 head count doubles their
    // score term (d^2 * h = C^2 / h)
    const CostReport row_d = variant([](CSAttnConfig& c) { c.progressive_heads = false; });
    const std::int64_t n = full.csattn.base_heads;
    const std::int64_t block_count = 2 * (full.blocks[0] + full.blocks[1]) + full.blocks[2];
    CHECK(base.params - row_d.params == 2 * n * block_count);
    std::int64_t expected_score_delta = 0;
    for (int level = 1; level <= 3; ++level) {
        const std::int64_t per_level = level == 3 ? full.blocks[2] : 2 * full.blocks[static_cast<std::size_t>(level - 1)];
        const std::int64_t hw = (32 >> (level - 1)) * (32 >> (level - 1));
        CSAttnConfig bc = full.level_csattn(level);
        for (int stage = 2; stage <= 3; ++stage) {
            CSAttnConfig without = bc;
            without.progressive_heads = false;
            expected_score_delta +=
                per_level * (attention_score_flops(without, stage, 32 >> (level - 1), 32 >> (level - 1), true) -
                             attention_score_flops(bc, stage, 32 >> (level - 1), 32 >> (level - 1), true));
        }
        (void)hw;
    }
    CHECK(row_d.attn_score_flops - base.attn_score_flops == expected_score_delta);
    CHECK(expected_score_delta > 0);
}

TEST_CASE("activation-memory estimate shrinks with spatial scaling") {
    NetConfig on = desk_net();
    NetConfig off = desk_net();
    off.csattn.use_spatial_scaling = false;
    CHECK(count_flops(on, 32, 32).peak_activation_bytes < count_flops(off, 32, 32).peak_activation_bytes);
}

TEST_CASE("forward is bitwise reproducible") {
    const NetConfig cfg = desk_net();
    Net<float> net = build_net<float>(cfg, 5);
    Rng rng(4);
    Tensor<float> img = rng.uniform_tensor<float>({2, 3, 32, 32}, 0, 1);
    auto run = [&]() {
        Tape<float> tape;
        auto leaves = make_leaves(tape, net.params, false);
        NetOutputs<float> out = forward_multiscale(tape.leaf(img), net.idx, leaves, cfg);
        return tape.val(out.full);
    };
    CHECK(bitwise_equal(run(), run()));
}

TEST_CASE("reflect padding restores arbitrary sizes through infer") {
    const NetConfig cfg = desk_net();
    Net<float> net = build_net<float>(cfg, 6);
    Rng rng(5);
    Tensor<float> img = rng.uniform_tensor<float>({1, 3, 37, 41}, 0, 1);
    Tensor<float> restored = infer_image(net, img);
    CHECK(restored.shape == Shape{1, 3, 37, 41});

    // padding alone: right/bottom mirror without edge repetition
    Tensor<float> small(Shape{1, 1, 2, 3}, {1, 2, 3, 4, 5, 6});
    Tensor<float> padded = pad_reflect_to_multiple(small, 4);
    CHECK(padded.shape == Shape{1, 1, 4, 4});
    CHECK(padded.data[0 * 4 + 3] == 2.0f);  // row 0: 1 2 3 2
    CHECK(padded.data[2 * 4 + 0] == 1.0f);  // row 2 mirrors row 0
}
