#include "oracles.hpp"
#include "trajlet/skeleton_io.hpp"
#include "trajlet/trajectorylet.hpp"

#include <gtest/gtest.h>

#include <random>
#include <sstream>

using namespace trajlet;

namespace {

std::vector<Vector> random_frames(std::mt19937_64 &rng, int frames, int width) {
    std::normal_distribution<double> g(0.0, 1.0);
    std::vector<Vector> out;
    for (int f = 0; f < frames; ++f) {
        Vector v(width);
        for (int i = 0; i < width; ++i) {
            v[i] = g(rng);
        }
        out.push_back(v);
    }
    return out;
}

TrajectoryletConfig config(int L, std::vector<Component> comps) {
    TrajectoryletConfig cfg;
    cfg.length = L;
    cfg.components = std::move(comps);
    return cfg;
}

}  // namespace

TEST(Trajectorylet, DimensionForDefaultConfig) {
    std::mt19937_64 rng(1);
    const auto frames = random_frames(rng, 5, 60);
    const auto t = extract_trajectorylets(frames, TrajectoryletConfig{});
    ASSERT_EQ(t.size(), 1U);
    EXPECT_EQ(t[0].values.size(), 720);
    EXPECT_EQ(TrajectoryletConfig{}.raw_dimension(20), 720);
}

TEST(Trajectorylet, ConstantPoseHasZeroDynamics) {
    std::vector<Vector> frames(7, Vector::LinSpaced(6, -1.0, 2.0));
    const auto t = extract_trajectorylets(frames, TrajectoryletConfig{});
    for (const auto &x : t) {
        // x1 and x2 blocks: (4 + 3) blocks of width 6
        ASSERT_EQ(x.values.size(), 12 * 6);
        EXPECT_EQ(x.values.tail(7 * 6).cwiseAbs().maxCoeff(), 0.0);
        EXPECT_EQ(x.values.head(6), frames[0]);
    }
}

TEST(Trajectorylet, UniformLinearMotion) {
    const Vector v = (Vector(3) << 0.5, -1.0, 2.0).finished();
    std::vector<Vector> frames;
    for (int t = 0; t < 5; ++t) {
        frames.push_back(t * v);
    }
    const auto out = extract_trajectorylets(frames, TrajectoryletConfig{});
    ASSERT_EQ(out.size(), 1U);
    const Vector &x = out[0].values;
    for (int i = 0; i < 5; ++i) {
        EXPECT_EQ(x.segment(3 * i, 3), i * v);
    }
    for (int i = 0; i < 4; ++i) {
        EXPECT_EQ(x.segment(15 + 3 * i, 3), (i + 1) * v);
    }
    for (int i = 0; i < 3; ++i) {
        EXPECT_EQ(x.segment(27 + 3 * i, 3), v);
    }
}

TEST(Trajectorylet, WindowCountAndProvenance) {
    std::mt19937_64 rng(2);
    const auto frames = random_frames(rng, 10, 6);
    const auto t = extract_trajectorylets(frames, TrajectoryletConfig{}, "inst", 4);
    ASSERT_EQ(t.size(), 6U);
    for (int k = 0; k < 6; ++k) {
        EXPECT_EQ(t[static_cast<std::size_t>(k)].start_frame, k);
        EXPECT_EQ(t[static_cast<std::size_t>(k)].source_instance, "inst");
        EXPECT_EQ(t[static_cast<std::size_t>(k)].class_label, 4);
    }
}

TEST(Trajectorylet, TooFewFramesNamesInstance) {
    std::mt19937_64 rng(3);
    const auto frames = random_frames(rng, 4, 6);
    try {
        extract_trajectorylets(frames, TrajectoryletConfig{}, "short_one");
        FAIL() << "expected an error";
    } catch (const invalid_argument &e) {
        EXPECT_NE(std::string(e.what()).find("short_one"), std::string::npos);
    }
}

TEST(Trajectorylet, ConfigValidation) {
    EXPECT_THROW(config(1, {Component::x0}).validate(), invalid_argument);
    EXPECT_THROW(config(2, {Component::x2}).validate(), invalid_argument);
    EXPECT_THROW(config(3, {Component::x3}).validate(), invalid_argument);
    EXPECT_THROW(config(5, {}).validate(), invalid_argument);
    TrajectoryletConfig bad;
    bad.pca_retain_fraction = 0.0;
    EXPECT_THROW(bad.validate(), invalid_argument);
    EXPECT_NO_THROW(config(4, {Component::x3}).validate());
}

TEST(Trajectorylet, DimensionLaw) {
    const std::vector<std::vector<Component>> subsets{
        {Component::x0},
        {Component::x1},
        {Component::x0, Component::x1},
        {Component::x0, Component::x1, Component::x2},
        {Component::x2, Component::x0},
        {Component::x0, Component::x1, Component::x2, Component::x3},
    };
    std::mt19937_64 rng(4);
    for (int L = 2; L <= 8; ++L) {
        for (const int J : {2, 5, 20}) {
            const auto frames = random_frames(rng, L + 2, 3 * J);
            for (const auto &comps : subsets) {
                int max_order = 0;
                long expected = 0;
                for (const auto c : comps) {
                    const int k = static_cast<int>(c);
                    max_order = std::max(max_order, k);
                    expected += static_cast<long>(L - k) * 3 * J;
                }
                if (L <= max_order) {
                    continue;
                }
                const auto cfg = config(L, comps);
                const auto t = extract_trajectorylets(frames, cfg);
                ASSERT_EQ(t.size(), 3U);
                EXPECT_EQ(t[0].values.size(), expected) << "L=" << L << " J=" << J;
                EXPECT_EQ(cfg.raw_dimension(J), expected);
            }
        }
    }
}

TEST(Trajectorylet, BlocksFollowComponentOrderNotConfigOrder) {
    std::mt19937_64 rng(5);
    const auto frames = random_frames(rng, 6, 6);
    const auto a = extract_trajectorylets(frames, config(5, {Component::x2, Component::x0}));
    const auto b = extract_trajectorylets(frames, config(5, {Component::x0, Component::x2}));
    EXPECT_EQ(a[0].values, b[0].values);
    EXPECT_EQ(a[0].values.head(6), frames[0]);
}

TEST(Trajectorylet, AccelerationBlock) {
    // cubic motion j^t = t^3: third differences of t^3 are 6
    std::vector<Vector> frames;
    for (int t = 0; t < 6; ++t) {
        frames.push_back(Vector::Constant(3, static_cast<double>(t * t * t)));
    }
    const auto out = extract_trajectorylets(frames, config(6, {Component::x3}));
    ASSERT_EQ(out.size(), 1U);
    ASSERT_EQ(out[0].values.size(), 9);
    // windows start at 0: x1_i = i^3, x2_i = i^3 - (i-1)^3 for i >= 2 (x2_1 = 1),
    // x3_i = x2_i - x2_{i-1} = 6i - 6 for i >= 3
    EXPECT_EQ(out[0].values, (Vector(9) << 12, 12, 12, 18, 18, 18, 24, 24, 24).finished());
}

TEST(Trajectorylet, ReversedSequenceDiffers) {
    std::mt19937_64 rng(6);
    auto frames = random_frames(rng, 9, 6);
    const auto fwd = extract_trajectorylets(frames, TrajectoryletConfig{});
    std::reverse(frames.begin(), frames.end());
    const auto bwd = extract_trajectorylets(frames, TrajectoryletConfig{});
    double biggest = 0.0;
    for (std::size_t k = 0; k < fwd.size(); ++k) {
        biggest = std::max(biggest, (fwd[k].values - bwd[k].values).cwiseAbs().maxCoeff());
    }
    EXPECT_GT(biggest, 1e-9);
}

TEST(Trajectorylet, RawTranslationDoesNotReachDescriptors) {
    SkeletonSequence seq;
    seq.joint_count = 3;
    seq.hip_index = 0;
    seq.topology = {{0, 1}, {1, 2}};
    std::mt19937_64 rng(7);
    std::normal_distribution<double> g(0.0, 1.0);
    for (int f = 0; f < 8; ++f) {
        seq.frames.push_back({{Joint(g(rng), g(rng), g(rng)), Joint(g(rng), g(rng), g(rng)),
                               Joint(g(rng), g(rng), g(rng))},
                              f});
    }
    auto moved = seq;
    for (auto &frame : moved.frames) {
        for (auto &j : frame.joints) {
            j += Joint(3.0, -4.0, 12.5);
        }
    }
    const auto a = extract_trajectorylets(hip_centered_frames(seq), TrajectoryletConfig{});
    const auto b = extract_trajectorylets(hip_centered_frames(moved), TrajectoryletConfig{});
    for (std::size_t k = 0; k < a.size(); ++k) {
        EXPECT_LT((a[k].values - b[k].values).cwiseAbs().maxCoeff(), 1e-12);
    }
}

TEST(Pca, RetainedDimension) {
    EXPECT_EQ(pca_retained_dim(720, 0.5), 360);
    EXPECT_EQ(pca_retained_dim(3, 2.0 / 3.0), 2);
    EXPECT_EQ(pca_retained_dim(7, 0.5), 4);
    EXPECT_EQ(pca_retained_dim(10, 1.0), 10);
}

TEST(Pca, HalfOfRawDimension) {
    std::mt19937_64 rng(8);
    const auto frames = random_frames(rng, 30, 60);
    const auto t = extract_trajectorylets(frames, TrajectoryletConfig{});
    const auto model = fit_pca(t, 0.5);
    EXPECT_EQ(model.retained_dim(), 360);
    EXPECT_EQ(model.raw_dim(), 720);
    const Matrix gram = model.basis * model.basis.transpose();
    EXPECT_LT((gram - Matrix::Identity(360, 360)).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(Pca, RankDeficientDataReconstructs) {
    std::mt19937_64 rng(9);
    std::normal_distribution<double> g(0.0, 1.0);
    const Vector u = (Vector(3) << 1, 2, -1).finished();
    const Vector v = (Vector(3) << 0, 1, 3).finished();
    const Vector offset = (Vector(3) << 5, -2, 0.5).finished();
    RowMatrix data(40, 3);
    for (int i = 0; i < 40; ++i) {
        data.row(i) = (offset + g(rng) * u + g(rng) * v).transpose();
    }
    const auto model = fit_pca(data, 2.0 / 3.0);
    ASSERT_EQ(model.retained_dim(), 2);
    for (int i = 0; i < 40; ++i) {
        const Vector x = data.row(i).transpose();
        const Vector z = model.basis * (x - model.mean);
        const Vector back = model.mean + model.basis.transpose() * z;
        EXPECT_LT((back - x).cwiseAbs().maxCoeff(), 1e-9);
        for (int j = 0; j < i; ++j) {
            const Vector y = data.row(j).transpose();
            const Vector zy = model.basis * (y - model.mean);
            EXPECT_NEAR((z - zy).norm(), (x - y).norm(), 1e-8);
        }
    }
}

TEST(Pca, EigenvaluesMatchCubicRoots) {
    std::mt19937_64 rng(10);
    std::normal_distribution<double> g(0.0, 1.0);
    for (int trial = 0; trial < 20; ++trial) {
        RowMatrix data(25, 3);
        for (int i = 0; i < 25; ++i) {
            data.row(i) << g(rng), 2.0 * g(rng) + 0.5 * data(i, 0), 0.3 * g(rng) - data(i, 0);
        }
        const auto model = fit_pca(data, 1.0);
        const Vector mean = data.colwise().mean().transpose();
        std::array<std::array<double, 3>, 3> cov{};
        for (int a = 0; a < 3; ++a) {
            for (int b = 0; b < 3; ++b) {
                double s = 0.0;
                for (int i = 0; i < 25; ++i) {
                    s += (data(i, a) - mean[a]) * (data(i, b) - mean[b]);
                }
                cov[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)] = s / 24.0;
            }
        }
        const auto roots = oracle::symmetric_3x3_eigenvalues(cov);
        for (int k = 0; k < 3; ++k) {
            EXPECT_NEAR(model.eigenvalues[k], roots[static_cast<std::size_t>(k)], 1e-9);
        }
    }
}

TEST(Pca, ProjectedVarianceEqualsEigenvalue) {
    std::mt19937_64 rng(11);
    std::normal_distribution<double> g(0.0, 1.0);
    RowMatrix data(60, 6);
    for (int i = 0; i < 60; ++i) {
        for (int j = 0; j < 6; ++j) {
            data(i, j) = (j + 1) * g(rng) + (j > 0 ? 0.5 * data(i, j - 1) : 0.0);
        }
    }
    const auto model = fit_pca(data, 0.5);
    Matrix z(60, model.retained_dim());
    for (int i = 0; i < 60; ++i) {
        z.row(i) = (model.basis * (data.row(i).transpose() - model.mean)).transpose();
    }
    for (Eigen::Index k = 0; k < model.retained_dim(); ++k) {
        const double mean = z.col(k).mean();
        const double var = (z.col(k).array() - mean).square().sum() / 59.0;
        EXPECT_NEAR(var, model.eigenvalues[k], 1e-8);
        Eigen::Index big = 0;
        model.basis.row(k).cwiseAbs().maxCoeff(&big);
        EXPECT_GT(model.basis(k, big), 0.0);
        if (k > 0) {
            EXPECT_GE(model.eigenvalues[k - 1], model.eigenvalues[k]);
        }
    }
}

TEST(Pca, ApplyCarriesMetadata) {
    std::mt19937_64 rng(12);
    const auto frames = random_frames(rng, 12, 6);
    const auto t = extract_trajectorylets(frames, TrajectoryletConfig{}, "abc", 3);
    const auto model = fit_pca(t, 0.5);
    Trajectorylet at_mean = t[2];
    at_mean.values = model.mean;
    const auto z = apply_pca(model, at_mean);
    EXPECT_EQ(z.values.size(), model.retained_dim());
    EXPECT_LT(z.values.cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_EQ(z.start_frame, 2);
    EXPECT_EQ(z.source_instance, "abc");
    EXPECT_EQ(z.class_label, 3);
    Trajectorylet wrong = t[0];
    wrong.values = Vector::Zero(5);
    EXPECT_THROW(apply_pca(model, wrong), dimension_error);
}

TEST(Pca, AxisModelTakesLeadingCoordinates) {
    PcaModel model;
    model.mean = Vector::Zero(5);
    model.basis = Matrix::Identity(5, 5).topRows(2);
    model.eigenvalues = Vector::Ones(2);
    Trajectorylet x;
    x.values = (Vector(5) << 4, -2, 7, 1, 3).finished();
    EXPECT_EQ(apply_pca(model, x).values, (Vector(2) << 4, -2).finished());
}

TEST(Pca, Errors) {
    RowMatrix one(1, 3);
    one << 1, 2, 3;
    EXPECT_THROW(fit_pca(one, 0.5), invalid_argument);
    std::vector<Trajectorylet> mixed(2);
    mixed[0].values = Vector::Zero(3);
    mixed[1].values = Vector::Zero(4);
    EXPECT_THROW(fit_pca(mixed, 0.5), dimension_error);
}

TEST(Pca, TextRoundTrip) {
    std::mt19937_64 rng(13);
    const auto frames = random_frames(rng, 12, 6);
    const auto model = fit_pca(extract_trajectorylets(frames, TrajectoryletConfig{}), 0.5);
    std::stringstream io;
    write_pca(io, model);
    const auto back = read_pca(io);
    EXPECT_EQ(back.mean, model.mean);
    EXPECT_EQ(back.basis, model.basis);
}
