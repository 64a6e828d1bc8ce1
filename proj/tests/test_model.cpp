#include <gtest/gtest.h>

#include <cstdio>
#include <random>

#include "laurel/model.hpp"

using namespace laurel;

namespace {

Tensor random_batch(std::size_t n, std::size_t d, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    Tensor t = Tensor::zeros({n, d});
    for (double& v : t.data) v = unif(rng);
    return t;
}

ModelConfig small_config(VariantKind kind, std::size_t rank) {
    ModelConfig cfg;
    cfg.input_dim = 3;
    cfg.width = 5;
    cfg.num_blocks = 3;
    cfg.hidden_mult = 2;
    cfg.num_classes = 4;
    cfg.variant = ResidualVariant{kind, rank};
    cfg.rank = rank;
    cfg.seed = 11;
    return cfg;
}

}  // namespace

TEST(Build, VanillaParamTotalMatchesHandCount) {
    ModelConfig cfg;
    cfg.input_dim = 3;
    cfg.width = 4;   // D
    cfg.num_blocks = 2;
    cfg.hidden_mult = 1;
    cfg.num_classes = 2;
    cfg.seed = 0;
    Model m = Model::build(cfg);
    // in: 3*4+4; per block: 4*4+4 + 4*4+4; head: 4*2+2
    const std::size_t expect = (3 * 4 + 4) + 2 * (4 * 4 + 4 + 4 * 4 + 4) + (4 * 2 + 2);
    EXPECT_EQ(m.count_params(), expect);
}

TEST(Build, SameSeedGivesBitIdenticalParameters) {
    ModelConfig cfg = small_config(VariantKind::RW_LR_PA, 2);
    Model a = Model::build(cfg), b = Model::build(cfg);
    ASSERT_EQ(a.params.size(), b.params.size());
    for (std::size_t i = 0; i < a.params.size(); ++i) {
        EXPECT_EQ(a.params[i].name, b.params[i].name);
        EXPECT_EQ(a.params[i].value, b.params[i].value);
    }
}

TEST(Build, RwAddsTwoPerBlock) {
    ModelConfig cfg = small_config(VariantKind::RW, 0);
    cfg.num_blocks = 8;
    ModelConfig vanilla = cfg;
    vanilla.variant = ResidualVariant{VariantKind::Vanilla, 0};
    EXPECT_EQ(Model::build(cfg).count_params() - Model::build(vanilla).count_params(), 16u);
}

TEST(Build, InvalidDimsRejected) {
    ModelConfig cfg = small_config(VariantKind::LR, 9);  // rank > width
    EXPECT_THROW(Model::build(cfg), std::invalid_argument);
    cfg = small_config(VariantKind::Vanilla, 0);
    cfg.width = 0;
    EXPECT_THROW(Model::build(cfg), std::invalid_argument);
}

TEST(Forward, LrAtInitEqualsVanillaTwin) {
    std::mt19937_64 rng(1);
    ModelConfig lr_cfg = small_config(VariantKind::LR, 2);
    ModelConfig va_cfg = lr_cfg;
    va_cfg.variant = ResidualVariant{VariantKind::Vanilla, 0};
    va_cfg.rank = 0;
    Model lr_model = Model::build(lr_cfg);
    Model va_model = Model::build(va_cfg);
    for (int k = 0; k < 5; ++k) {
        Tensor batch = random_batch(4, lr_cfg.input_dim, rng);
        EXPECT_EQ(lr_model.forward(batch).data, va_model.forward(batch).data);
    }
}

TEST(Forward, ZeroInputZeroBiasGivesZeroLogits) {
    ModelConfig cfg = small_config(VariantKind::Vanilla, 0);
    Model m = Model::build(cfg);
    Tensor batch = Tensor::zeros({3, cfg.input_dim});
    Tensor logits = m.forward(batch);
    for (double v : logits.data) EXPECT_EQ(v, 0.0);
}

TEST(Forward, ShapeContractAndFiniteness) {
    std::mt19937_64 rng(2);
    ModelConfig cfg = small_config(VariantKind::RW_LR_PA, 2);
    Model m = Model::build(cfg);
    Tensor batch = random_batch(7, cfg.input_dim, rng);
    Tensor logits = m.forward(batch);
    EXPECT_EQ(logits.shape, (Shape{7, cfg.num_classes}));
    for (double v : logits.data) EXPECT_TRUE(std::isfinite(v));
}

TEST(Forward, BatchWidthMismatchRejected) {
    Model m = Model::build(small_config(VariantKind::Vanilla, 0));
    EXPECT_THROW(m.forward(Tensor::zeros({2, 7})), std::invalid_argument);
}

TEST(Forward, DeterministicGivenSeedAndInput) {
    std::mt19937_64 rng(3);
    ModelConfig cfg = small_config(VariantKind::RW_LR, 3);
    Model m = Model::build(cfg);
    Tensor batch = random_batch(5, cfg.input_dim, rng);
    EXPECT_EQ(m.forward(batch).data, m.forward(batch).data);
}

TEST(NaiveScale, AddsOneVanillaBlock) {
    ModelConfig cfg = small_config(VariantKind::RW_LR, 2);
    ModelConfig scaled = naive_scale(cfg);
    EXPECT_EQ(scaled.num_blocks, cfg.num_blocks + 1);
    EXPECT_EQ(scaled.variant.kind, VariantKind::Vanilla);
    ModelConfig twice = naive_scale(scaled);
    EXPECT_EQ(twice.num_blocks, cfg.num_blocks + 2);
}

TEST(NaiveScale, ParamDeltaIsOneBlockMlp) {
    ModelConfig cfg = small_config(VariantKind::Vanilla, 0);
    const std::size_t D = cfg.width, H = cfg.hidden_mult * D;
    const std::size_t base = Model::build(cfg).count_params();
    const std::size_t scaled = Model::build(naive_scale(cfg)).count_params();
    EXPECT_EQ(scaled - base, D * H + H + H * D + D);
}

TEST(Checkpoint, RoundTripPreservesParamsAndLogits) {
    std::mt19937_64 rng(4);
    ModelConfig cfg = small_config(VariantKind::RW_LR_PA, 2);
    Model m = Model::build(cfg);
    // perturb away from init so the payload actually matters
    for (ParamTensor& p : m.params)
        for (double& v : p.value) v += 0.01;
    const std::string path = "checkpoint_roundtrip_test.bin";
    save_checkpoint(m, path);
    Model loaded = load_checkpoint(path);
    std::remove(path.c_str());
    ASSERT_EQ(loaded.params.size(), m.params.size());
    for (std::size_t i = 0; i < m.params.size(); ++i)
        EXPECT_EQ(loaded.params[i].value, m.params[i].value);
    Tensor batch = random_batch(3, cfg.input_dim, rng);
    EXPECT_EQ(loaded.forward(batch).data, m.forward(batch).data);
}
