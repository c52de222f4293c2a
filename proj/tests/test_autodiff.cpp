#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "op_cases.hpp"
#include "panama/autodiff.hpp"

using namespace panama;
using ad::Array;
using ad::Graph;

namespace {

std::vector<double> conv(std::vector<double> x, std::vector<double> k, std::size_t d, bool causal = true) {
    Graph g;
    const std::size_t K = k.size(), T = x.size();
    auto in = g.constant(Array({1, T}, std::move(x)));
    auto ker = g.constant(Array({1, 1, K}, std::move(k)));
    return ad::conv1d_dilated(in, ker, d, causal).value().data;
}

}  // namespace

TEST(Conv1d, IdentityKernel) {
    for (std::size_t d : {1u, 2u, 5u}) EXPECT_EQ(conv({1, 2, 3, 4}, {1}, d), (std::vector<double>{1, 2, 3, 4}));
}

TEST(Conv1d, DilatedTwoTap) { EXPECT_EQ(conv({1, 2, 3, 4}, {1, 1}, 2), (std::vector<double>{1, 2, 4, 6})); }

TEST(Conv1d, TapConventionMatchesDirectSum) {
    std::mt19937_64 rng(5);
    const std::vector<double> x = testkit::random_array({9}, rng).data;
    const std::vector<double> k = testkit::random_array({3}, rng).data;
    const std::size_t d = 2;
    const auto out = conv(x, k, d);
    for (std::size_t t = 0; t < x.size(); ++t) {
        double want = 0.0;
        for (std::size_t j = 0; j < k.size(); ++j) {
            const long idx = static_cast<long>(t) - static_cast<long>(d * (k.size() - 1 - j));
            if (idx >= 0) want += k[j] * x[static_cast<std::size_t>(idx)];
        }
        EXPECT_NEAR(out[t], want, 1e-15);
    }
}

TEST(Conv1d, ValidModeDropsPaddedPrefix) {
    EXPECT_EQ(conv({1, 2, 3, 4}, {1, 1}, 2, false), (std::vector<double>{4, 6}));
}

TEST(Conv1d, ZeroKernel) {
    for (double v : conv({3, -1, 2, 7, 1}, {0, 0, 0}, 1)) EXPECT_EQ(v, 0.0);
}

TEST(Conv1d, ChannelMismatchReportsDimensions) {
    Graph g;
    auto in = g.constant(Array({2, 5}));
    auto ker = g.constant(Array({1, 3, 2}));
    try {
        ad::conv1d_dilated(in, ker, 1);
        FAIL() << "expected a shape error";
    } catch (const std::invalid_argument& e) {
        EXPECT_NE(std::string(e.what()).find("C_in=2"), std::string::npos) << e.what();
        EXPECT_NE(std::string(e.what()).find("C_in=3"), std::string::npos) << e.what();
    }
}

TEST(Conv1d, CausalUnderPerturbation) {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 20; ++trial) {
        Array x = testkit::random_array({2, 16}, rng);
        const Array k = testkit::random_array({3, 2, 3}, rng);
        Graph g;
        const auto base = ad::conv1d_dilated(g.constant(x), g.constant(k), 3).value();
        const std::size_t t0 = std::uniform_int_distribution<std::size_t>(0, 15)(rng);
        x.at(1, t0) += 0.5;
        const auto pert = ad::conv1d_dilated(g.constant(x), g.constant(k), 3).value();
        for (std::size_t o = 0; o < 3; ++o)
            for (std::size_t t = 0; t < t0; ++t) EXPECT_EQ(base.at(o, t), pert.at(o, t));
    }
}

TEST(Elementwise, GatedZeroIsZero) {
    Graph g;
    auto z = g.constant(Array::scalar(0.0));
    EXPECT_EQ((ad::tanh(z) * ad::sigmoid(z)).item(), 0.0);
}

TEST(Elementwise, BroadcastOverTime) {
    Graph g;
    auto b = ad::broadcast_time(g.constant(Array::vector({1, 2})), 3);
    EXPECT_EQ(b.shape(), (ad::Shape{2, 3}));
    EXPECT_EQ(b.value().data, (std::vector<double>{1, 1, 1, 2, 2, 2}));
}

TEST(Elementwise, Mean) {
    Graph g;
    EXPECT_EQ(ad::mean(g.constant(Array::vector({1, 2, 3}))).item(), 2.0);
}

TEST(Elementwise, IncompatibleShapesRejected) {
    Graph g;
    auto a = g.constant(Array::vector({1, 2}));
    auto b = g.constant(Array::vector({1, 2, 3}));
    EXPECT_THROW(a + b, std::invalid_argument);
    EXPECT_THROW(a * b, std::invalid_argument);
    EXPECT_THROW(ad::matmul(g.constant(Array({2, 3})), g.constant(Array({2, 3}))), std::invalid_argument);
}

TEST(Elementwise, NonFiniteLeafRejected) {
    Graph g;
    EXPECT_THROW(g.leaf(Array::vector({1.0, std::nan("")})), std::invalid_argument);
}

TEST(Backward, SquareAtThree) {
    Graph g;
    auto w = g.leaf(Array::scalar(3.0));
    g.backward(ad::square(w));
    EXPECT_EQ(w.grad()[0], 6.0);
}

TEST(Backward, UnusedLeafGetsZero) {
    Graph g;
    auto w = g.leaf(Array::scalar(3.0));
    auto u = g.leaf(Array::vector({1, 2}));
    g.backward(ad::square(w));
    EXPECT_EQ(u.grad(), (std::vector<double>{0.0, 0.0}));
}

TEST(Backward, NonScalarRootRejected) {
    Graph g;
    auto v = g.leaf(Array::vector({1, 2}));
    EXPECT_THROW(g.backward(ad::square(v)), std::invalid_argument);
}

TEST(Backward, RepeatedBackwardIsDeterministic) {
    std::mt19937_64 rng(3);
    Graph g;
    auto x = g.leaf(testkit::random_array({2, 12}, rng));
    auto k = g.leaf(testkit::random_array({2, 2, 3}, rng));
    auto root = ad::mean(ad::tanh(ad::conv1d_dilated(x, k, 2)));
    g.backward(root);
    const auto gx = x.grad(), gk = k.grad();
    g.zero_grad();
    g.backward(root);
    EXPECT_EQ(x.grad(), gx);
    EXPECT_EQ(k.grad(), gk);
}

TEST(Backward, ConvTanhMeanMatchesFiniteDifferences) {
    std::mt19937_64 rng(17);
    const std::vector<Array> in = {testkit::random_array({2, 10}, rng), testkit::random_array({3, 2, 2}, rng)};
    const double err = testkit::gradcheck(in, [](Graph&, const std::vector<ad::Var>& v) {
        return ad::mean(ad::tanh(ad::conv1d_dilated(v[0], v[1], 2)));
    });
    EXPECT_LT(err, 1e-6);
}

class OpGradient : public ::testing::TestWithParam<std::size_t> {};

TEST_P(OpGradient, MatchesCentralDifferencesOver100Trials) {
    const auto cases = testkit::op_cases();
    const auto& c = cases.at(GetParam());
    std::mt19937_64 rng(1000 + GetParam());
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) worst = std::max(worst, testkit::gradcheck(c.inputs(rng), c.fn));
    EXPECT_LT(worst, 1e-6) << c.name;
}

INSTANTIATE_TEST_SUITE_P(AllOps, OpGradient, ::testing::Range<std::size_t>(0, testkit::op_cases().size()),
                         [](const ::testing::TestParamInfo<std::size_t>& info) {
                             return testkit::op_cases().at(info.param).name;
                         });

TEST(Ops, SliceAndConcatValues) {
    Graph g;
    auto a = g.constant(Array::matrix(2, 3, {1, 2, 3, 4, 5, 6}));
    EXPECT_EQ(ad::slice(a, 1, 2).value().data, (std::vector<double>{2, 3, 5, 6}));
    auto c = ad::concat({g.constant(Array::vector({1})), g.constant(Array::vector({2, 3}))});
    EXPECT_EQ(c.value().data, (std::vector<double>{1, 2, 3}));
}

TEST(Ops, LogRejectsNonPositive) {
    Graph g;
    EXPECT_THROW(ad::log(g.constant(Array::vector({1.0, 0.0}))), std::domain_error);
}
