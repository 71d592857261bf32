#include <gtest/gtest.h>

#include <random>

#include "edcnn/compiler.hpp"
#include "edcnn/errors.hpp"
#include "test_util.hpp"

namespace edcnn {
namespace {

using testing::max_abs_diff;
using testing::random_filter;
using testing::random_vector;

Matrix random_matrix(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols) {
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
    return m;
}

DFCN random_dfcn(std::mt19937_64& rng, std::size_t d, std::size_t width, std::size_t depth) {
    std::vector<AffineLayer> layers;
    std::size_t in = d;
    for (std::size_t k = 0; k < depth; ++k) {
        layers.push_back({random_matrix(rng, static_cast<Eigen::Index>(width), static_cast<Eigen::Index>(in)),
                          random_vector(rng, width, -0.5, 0.5)});
        in = width;
    }
    return DFCN(d, std::move(layers), random_vector(rng, width));
}

// relu(W x + theta) computed directly.
Vector affine_relu(const Matrix& W, const Vector& theta, const Vector& x) {
    Vector out(theta);
    for (Eigen::Index j = 0; j < W.rows(); ++j) {
        for (Eigen::Index i = 0; i < W.cols(); ++i) out[j] += W(j, i) * x[i];
        out[j] = std::max(out[j], 0.0);
    }
    return out;
}

TEST(CompiledDepth, Examples) {
    EXPECT_EQ(compiled_depth(2, 14, 2), 28u);
    EXPECT_EQ(compiled_depth(14, 14, 2), 196u);
    EXPECT_EQ(compiled_depth(14, 14, 3), 98u);
    EXPECT_EQ(compiled_depth(3, 1, 5), 1u);
    EXPECT_THROW(compiled_depth(2, 2, 1), InvalidArgument);
}

TEST(StackRows, TwoByTwo) {
    Matrix W(2, 2);
    W << 1, 2, 3, 4;
    EXPECT_EQ(stack_rows(W), Filter({2, 1, 4, 3}));
}

TEST(StackRows, OneByOneAndIdentity) {
    Matrix one(1, 1);
    one << 5;
    EXPECT_EQ(stack_rows(one), Filter({5}));
    EXPECT_EQ(stack_rows(Matrix::Identity(3, 3)), Filter({0, 0, 1, 0, 1, 0, 1, 0, 0}));
    EXPECT_THROW(stack_rows(Matrix::Zero(2, 3)), InvalidArgument);
}

TEST(StackRows, SelectedToeplitzRowsReproduceW) {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 20; ++trial) {
        const auto rows = 1 + static_cast<Eigen::Index>(rng() % 6);
        const auto cols = 1 + static_cast<Eigen::Index>(rng() % 6);
        const Matrix W = random_matrix(rng, rows, cols);
        const Filter u = stack_rows(W);
        // T(i, k) = u_{i-k}, 1-based; row j*cols of T restricted to the first cols columns.
        for (Eigen::Index j = 1; j <= rows; ++j) {
            for (Eigen::Index k = 1; k <= cols; ++k) {
                EXPECT_EQ(u[j * cols - k], W(j - 1, k - 1));
            }
        }
    }
}

TEST(BiasBounds, UnitNormFactors) {
    const std::vector<Filter> factors(4, Filter::delta());
    const auto schedule = bias_bounds(factors);
    ASSERT_EQ(schedule.depth(), 4u);
    for (std::size_t l = 0; l < 4; ++l) {
        EXPECT_DOUBLE_EQ(schedule.bounds[l + 1], 1.0);
        EXPECT_DOUBLE_EQ(schedule.inner_biases[l], std::ldexp(1.0, static_cast<int>(l)));
    }
}

TEST(BiasBounds, SingleFactor) {
    const std::vector<Filter> factors{Filter({1, 1})};
    const auto schedule = bias_bounds(factors);
    EXPECT_DOUBLE_EQ(schedule.bounds[1], 2.0);
    EXPECT_DOUBLE_EQ(schedule.inner_biases[0], 2.0);
    EXPECT_THROW(bias_bounds(std::vector<Filter>{Filter()}), InvalidArgument);
    EXPECT_THROW(bias_bounds(std::vector<Filter>{}), InvalidArgument);
}

// Both schedules keep every pre-activation non-negative on random unit-cube inputs.
TEST(BiasSchedules, PreactivationsNonNegative) {
    std::mt19937_64 rng(12);
    for (int trial = 0; trial < 30; ++trial) {
        const std::size_t depth = 1 + rng() % 8;
        const std::size_t n = 1 + rng() % 5;
        std::vector<Filter> factors;
        for (std::size_t l = 0; l < depth; ++l) factors.push_back(random_filter(rng, 2));
        const auto doubling = bias_bounds(factors);
        const auto tight = tight_bias_schedule(factors, Vector(n, 1.0));
        for (int p = 0; p < 20; ++p) {
            const auto x = random_vector(rng, n, 0.0, 1.0);
            EXPECT_GE(evaluate_chain(factors, doubling, x).min_preactivation, 0.0);
            EXPECT_GE(evaluate_chain(factors, tight, x).min_preactivation, 1.0 - 1e-9);
        }
    }
}

TEST(ChainIdentity, SingleLayerIsAffine) {
    const std::vector<Filter> factors{Filter({1, -2, 0.5})};
    const auto schedule = bias_bounds(factors);
    const Vector x{0.25, 1.0};
    const Vector got = chain_affine_identity(factors, schedule, x);
    const double b = schedule.inner_biases[0];
    const Vector want{0.25 + b, -0.5 + 1.0 + b, 0.125 - 2.0 + b, 0.5 + b};
    EXPECT_LT(max_abs_diff(got, want), 1e-12);
}

TEST(ChainIdentity, RandomChainsAndZeroInput) {
    std::mt19937_64 rng(13);
    for (int trial = 0; trial < 10; ++trial) {
        std::vector<Filter> factors;
        for (int l = 0; l < 4; ++l) factors.push_back(random_filter(rng, 3));
        const auto schedule = tight_bias_schedule(factors, Vector(3, 1.0));
        const auto eval = evaluate_chain(factors, schedule, random_vector(rng, 3, 0.0, 1.0));
        EXPECT_LT(eval.max_disagreement, 1e-10);
        EXPECT_NO_THROW(chain_affine_identity(factors, schedule, Vector(3, 0.0)));
    }
}

TEST(ChainIdentity, TooSmallScheduleIsReported) {
    const std::vector<Filter> factors{Filter({-1.0}), Filter({1.0})};
    const BiasSchedule none{{1.0, 1.0, 1.0}, {0.0, 0.0}};
    EXPECT_THROW(chain_affine_identity(factors, none, Vector{1.0}), NumericalFailure);
}

TEST(CompileBlock, IdentityBlock) {
    const AffineBlock block{Matrix::Identity(3, 3), Vector(3, 0.0)};
    const auto compiled = compile_block(block, 2);
    EXPECT_EQ(compiled.report.depth, compiled_depth(3, 3, 2));
    EXPECT_EQ(compiled.report.pooling_size, 3u);
    EXPECT_LE(compiled.report.max_abs_error, 1e-6);
    std::mt19937_64 rng(14);
    const PooledEDCNN net(3, 2, compiled.layers, Vector(compiled.output_width, 0.0));
    for (int p = 0; p < 50; ++p) {
        const auto x = random_vector(rng, 3, 0.0, 1.0);
        const Vector f = net.features(x);
        for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(f[j], x[j], 1e-9);
        for (std::size_t j = 3; j < f.size(); ++j) EXPECT_EQ(f[j], 0.0);
    }
}

TEST(CompileBlock, FirstLayerShape) {
    std::mt19937_64 rng(15);
    const AffineBlock block{random_matrix(rng, 14, 2), random_vector(rng, 14, -0.5, 0.5)};
    const auto compiled = compile_block(block, 2);
    EXPECT_EQ(compiled.layers.size(), 28u);
    EXPECT_LE(compiled.report.max_abs_error, 1e-6);
    EXPECT_EQ(compiled.report.probe_count, 1004u);
    const PooledEDCNN net(2, 2, compiled.layers, Vector(compiled.output_width, 0.0));
    for (int p = 0; p < 100; ++p) {
        const auto x = random_vector(rng, 2, 0.0, 1.0);
        const Vector f = net.features(x);
        EXPECT_LT(max_abs_diff(std::span(f).first(14), affine_relu(block.weights, block.bias, x)), 1e-6);
    }
}

TEST(CompileBlock, LargeNegativeThresholdGivesZero) {
    std::mt19937_64 rng(16);
    const AffineBlock block{random_matrix(rng, 4, 2), Vector(4, -100.0)};
    const auto compiled = compile_block(block, 3);
    const PooledEDCNN net(2, 3, compiled.layers, Vector(compiled.output_width, 1.0));
    for (int p = 0; p < 50; ++p) EXPECT_NEAR(net.evaluate(random_vector(rng, 2, 0.0, 1.0)), 0.0, 1e-9);
}

TEST(CompileBlock, ZeroExtendedInputBox) {
    std::mt19937_64 rng(17);
    const AffineBlock block{random_matrix(rng, 3, 3), random_vector(rng, 3)};
    const Vector upper{2.0, 0.5, 1.0, 0.0, 0.0};
    const auto compiled = compile_block(block, 2, upper);
    EXPECT_EQ(compiled.input_width, 5u);
    EXPECT_LE(compiled.report.max_abs_error, 1e-6);
    EXPECT_THROW(compile_block(block, 2, Vector{1.0, 1.0, 1.0, 1.0}), InvalidArgument);
    EXPECT_THROW(compile_block(block, 2, Vector{1.0, 1.0}), InvalidArgument);
}

TEST(CompileBlock, DoublingScheduleWorksForShortChains) {
    std::mt19937_64 rng(18);
    const AffineBlock block{random_matrix(rng, 2, 2), random_vector(rng, 2)};
    CompileOptions options;
    options.bias_mode = BiasMode::Doubling;
    EXPECT_LE(compile_block(block, 2, options).report.max_abs_error, 1e-6);
}

TEST(CompileDfcn, DepthOne) {
    std::mt19937_64 rng(19);
    const DFCN net = random_dfcn(rng, 2, 14, 1);
    const auto compiled = compile_dfcn(net, 2);
    EXPECT_TRUE(compiled.report.ok());
    EXPECT_EQ(compiled.network.depth(), 28u);
    for (int p = 0; p < 200; ++p) {
        const auto x = random_vector(rng, 2, 0.0, 1.0);
        EXPECT_NEAR(compiled.network.evaluate(x), net.evaluate(x), 1e-6);
    }
}

TEST(CompileDfcn, DepthThreeMatchesOnFreshProbes) {
    std::mt19937_64 rng(20);
    const DFCN net = random_dfcn(rng, 2, 6, 3);
    const auto compiled = compile_dfcn(net, 2);
    EXPECT_EQ(compiled.blocks.size(), 3u);
    EXPECT_EQ(compiled.network.depth(), 12u + 36u + 36u);
    double worst = 0.0;
    for (int p = 0; p < 500; ++p) {
        const auto x = random_vector(rng, 2, 0.0, 1.0);
        worst = std::max(worst, std::abs(compiled.network.evaluate(x) - net.evaluate(x)));
    }
    EXPECT_LE(worst, 1e-6);
}

TEST(CompileDfcn, AllZeroWeights) {
    std::vector<AffineLayer> layers{{Matrix::Zero(3, 2), Vector{0.5, -1.0, 0.0}}};
    const DFCN net(2, std::move(layers), Vector{2.0, 1.0, 1.0});
    const auto compiled = compile_dfcn(net, 2);
    std::mt19937_64 rng(21);
    for (int p = 0; p < 20; ++p) EXPECT_NEAR(compiled.network.evaluate(random_vector(rng, 2, 0.0, 1.0)), 1.0, 1e-9);
}

// Error grows with depth but stays far inside tolerance for the widest block in use.
TEST(CompileBlock, ErrorAccumulationStaysSmall) {
    std::mt19937_64 rng(22);
    const AffineBlock block{random_matrix(rng, 14, 14), random_vector(rng, 14, -0.5, 0.5)};
    const Vector upper(14, 3.0);
    const auto compiled = compile_block(block, 2, upper);
    EXPECT_EQ(compiled.report.depth, 196u);
    EXPECT_LE(compiled.report.max_abs_error, 1e-7);
    EXPECT_EQ(compiled.report.max_suffix_abs, 0.0);
}

}  // namespace
}  // namespace edcnn
