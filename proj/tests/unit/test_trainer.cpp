#include <gtest/gtest.h>

#include <cmath>
#include <algorithm>
#include <numeric>

#include "helpers.hpp"
#include "tsmix/error.hpp"
#include "tsmix/random.hpp"
#include "tsmix/trainer.hpp"

using namespace tsmix;

namespace {

std::vector<std::size_t> iota_n(std::size_t n) {
    std::vector<std::size_t> v(n);
    std::iota(v.begin(), v.end(), std::size_t{0});
    return v;
}

// Gaussian elimination with partial pivoting on a dense square system.
std::vector<double> solve_dense(std::vector<std::vector<double>> a, std::vector<double> b) {
    const std::size_t n = b.size();
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t pivot = col;
        for (std::size_t r = col + 1; r < n; ++r) {
            if (std::abs(a[r][col]) > std::abs(a[pivot][col])) pivot = r;
        }
        std::swap(a[col], a[pivot]);
        std::swap(b[col], b[pivot]);
        for (std::size_t r = col + 1; r < n; ++r) {
            const double f = a[r][col] / a[col][col];
            for (std::size_t c = col; c < n; ++c) a[r][c] -= f * a[col][c];
            b[r] -= f * b[col];
        }
    }
    std::vector<double> x(n);
    for (std::size_t i = n; i-- > 0;) {
        double s = b[i];
        for (std::size_t c = i + 1; c < n; ++c) s -= a[i][c] * x[c];
        x[i] = s / a[i][i];
    }
    return x;
}

double ridge_objective(const TrainingData& d, const Matrix& coef, double lambda, std::size_t target) {
    const std::size_t F = d.features.cols;
    double obj = 0.0;
    for (std::size_t i = 0; i < d.features.rows; ++i) {
        double y = coef(F, target);
        for (std::size_t f = 0; f < F; ++f) y += coef(f, target) * d.features(i, f);
        const double r = y - d.windows.targets(i, target);
        obj += r * r;
    }
    for (std::size_t f = 0; f < F; ++f) obj += lambda * coef(f, target) * coef(f, target);
    return obj;
}

TrainingData random_linear_problem(std::size_t n, std::size_t F, std::size_t T, double noise, std::uint64_t seed,
                                   std::vector<Split> splits = {}) {
    Rng rng(seed);
    Matrix x(n, F), y(n, T);
    for (auto& v : x.data) v = standard_normal(rng);
    Matrix w(F + 1, T);
    for (auto& v : w.data) v = standard_normal(rng);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t t = 0; t < T; ++t) {
            double s = w(F, t);
            for (std::size_t f = 0; f < F; ++f) s += w(f, t) * x(i, f);
            y(i, t) = s + noise * standard_normal(rng);
        }
    }
    return test::make_linear_data(x, y, splits);
}

}  // namespace

TEST(ComputeEpochs, Examples) {
    EXPECT_EQ(compute_epochs(1'000'000, 10'000, 10), 10u);
    EXPECT_EQ(compute_epochs(5, 10'000, 10), 1u);
    EXPECT_EQ(compute_epochs(100'001, 1000, 10), 11u);
    EXPECT_THROW(compute_epochs(0, 1, 1), Error);
    PatchNetShape s;
    s.window_length = 300;
    s.patch_len = 30;
    EXPECT_EQ(s.patches(), 10u);
}

TEST(ComputeEpochsProperty, TokenAccountingIsTight) {
    Rng rng(1);
    for (int i = 0; i < 2000; ++i) {
        const std::uint64_t budget = 1 + uniform_index(rng, 5'000'000);
        const std::uint64_t n = 1 + uniform_index(rng, 20'000);
        const std::uint64_t ppw = 1 + uniform_index(rng, 20);
        const auto e = compute_epochs(budget, n, ppw);
        EXPECT_GE(e * n * ppw, budget);
        if (e > 1) EXPECT_LT((e - 1) * n * ppw, budget);
    }
}

TEST(LrSchedule, Examples) {
    EXPECT_DOUBLE_EQ(lr_at_step(0, 10, 1e-4, 0.3), 1e-4 / 3.0);
    EXPECT_DOUBLE_EQ(lr_at_step(2, 10, 1e-4, 0.3), 1e-4);
    EXPECT_DOUBLE_EQ(lr_at_step(9, 10, 1e-4, 0.3), 1e-4 / 7.0);
    EXPECT_THROW(lr_at_step(10, 10, 1e-4, 0.3), Error);
}

TEST(LrScheduleProperty, ContinuousAndNonNegative) {
    for (std::size_t total : {1u, 2u, 7u, 10u, 333u, 5000u}) {
        for (double frac : {0.05, 0.3, 0.5, 0.95}) {
            const double peak = 1e-3;
            const auto B = static_cast<std::size_t>(std::ceil(frac * static_cast<double>(total)));
            double prev = 0.0;
            for (std::size_t s = 0; s < total; ++s) {
                const double lr = lr_at_step(s, total, peak, frac);
                EXPECT_GE(lr, 0.0);
                EXPECT_LE(lr, peak * (1.0 + 1e-12));
                // neighbouring steps differ by at most one step's increment
                if (s > 0) {
                    const double inc = peak / static_cast<double>(std::min(B, total - B > 0 ? total - B : B));
                    EXPECT_LE(std::abs(lr - prev), inc + 1e-15) << total << " " << frac << " " << s;
                }
                prev = lr;
            }
        }
    }
}

TEST(TrainConfig, Validation) {
    TrainConfig c;
    EXPECT_NO_THROW(c.validate(300));
    EXPECT_THROW(c.validate(301), Error);
    c.warmup_fraction = 1.0;
    EXPECT_THROW(c.validate(300), Error);
    c = TrainConfig{};
    c.token_budget = 0;
    EXPECT_THROW(c.validate(300), Error);
    c = TrainConfig{};
    c.ridge_lambda = 0.0;
    EXPECT_THROW(c.validate(300), Error);
    EXPECT_THROW(parse_trainer("svm"), Error);
    EXPECT_EQ(parse_trainer("patch-net"), TrainerKind::patch_net);
}

TEST(Ridge, MatchesDenseNormalEquationSolve) {
    const auto d = random_linear_problem(50, 6, 2, 0.5, 3);
    const double lambda = 0.7;
    const auto model = train_ridge(iota_n(50), d, lambda);
    const std::size_t F = 6;
    for (std::size_t t = 0; t < 2; ++t) {
        std::vector<std::vector<double>> a(F + 1, std::vector<double>(F + 1, 0.0));
        std::vector<double> b(F + 1, 0.0);
        for (std::size_t i = 0; i < 50; ++i) {
            std::vector<double> row(d.features.row(i).begin(), d.features.row(i).end());
            row.push_back(1.0);
            for (std::size_t r = 0; r <= F; ++r) {
                for (std::size_t c = 0; c <= F; ++c) a[r][c] += row[r] * row[c];
                b[r] += row[r] * d.windows.targets(i, t);
            }
        }
        for (std::size_t r = 0; r < F; ++r) a[r][r] += lambda;
        const auto x = solve_dense(a, b);
        for (std::size_t r = 0; r <= F; ++r) EXPECT_NEAR(model.coefficients(r, t), x[r], 1e-8);
    }
}

TEST(Ridge, InterpolatesExactlyLinearData) {
    const auto d = random_linear_problem(40, 5, 1, 0.0, 4);
    const auto model = train_ridge(iota_n(40), d, 1e-9);
    double mse = 0.0;
    for (std::size_t i = 0; i < 40; ++i) {
        const double r = model.predict(d.features.row(i))[0] - d.windows.targets(i, 0);
        mse += r * r / 40.0;
    }
    EXPECT_LT(mse, 1e-10);
}

TEST(Ridge, HugePenaltyPredictsTheMean) {
    const auto d = random_linear_problem(30, 4, 2, 1.0, 5);
    const auto model = train_ridge(iota_n(30), d, 1e12);
    for (std::size_t t = 0; t < 2; ++t) {
        double mean = 0.0;
        for (std::size_t i = 0; i < 30; ++i) mean += d.windows.targets(i, t) / 30.0;
        EXPECT_NEAR(model.coefficients(4, t), mean, 1e-6);
        for (std::size_t f = 0; f < 4; ++f) EXPECT_NEAR(model.coefficients(f, t), 0.0, 1e-6);
    }
}

TEST(Ridge, UsesOnlyTheMixtureRows) {
    auto d = random_linear_problem(20, 3, 1, 0.1, 6);
    const std::vector<std::size_t> mix = {1, 4, 5, 9, 11, 12, 17};
    const auto a = train_ridge(mix, d, 0.1);
    for (std::size_t i = 0; i < 20; ++i) {
        if (std::find(mix.begin(), mix.end(), i) == mix.end()) d.windows.targets(i, 0) = 1e6;
    }
    EXPECT_EQ(train_ridge(mix, d, 0.1).coefficients, a.coefficients);
}

TEST(Ridge, SingularSystemIsATrialFailure) {
    Matrix x(5, 2, 0.0);
    Matrix y(5, 1, 1.0);
    for (std::size_t i = 0; i < 5; ++i) x(i, 0) = x(i, 1) = 1e9 * static_cast<double>(i);
    const auto d = test::make_linear_data(x, y, {});
    EXPECT_THROW(train_ridge(iota_n(5), d, 1e-300), TrialFailure);
    EXPECT_THROW(train_ridge(std::vector<std::size_t>{}, d, 1.0), TrialFailure);
}

TEST(RidgeProperty, BeatsRandomPerturbations) {
    const auto d = random_linear_problem(60, 5, 1, 0.8, 7);
    const double lambda = 0.3;
    const auto model = train_ridge(iota_n(60), d, lambda);
    const double best = ridge_objective(d, model.coefficients, lambda, 0);
    Rng rng(8);
    for (int i = 0; i < 1000; ++i) {
        Matrix c = model.coefficients;
        const double scale = std::pow(10.0, -6.0 + 5.0 * uniform01(rng));
        for (auto& v : c.data) v += scale * standard_normal(rng);
        EXPECT_LE(best, ridge_objective(d, c, lambda, 0));
    }
}

TEST(Evaluate, DefinitionExamples) {
    Matrix x(3, 1, 0.0);
    Matrix y(3, 1, 1.0);
    const auto d = test::make_linear_data(x, y, {Split::train, Split::val, Split::val});
    RidgeModel zero;
    zero.coefficients = Matrix(2, 1, 0.0);
    const auto m = evaluate(ForecastModel{zero}, d, Split::val);
    EXPECT_DOUBLE_EQ(m.targets[0].mse, 1.0);
    EXPECT_DOUBLE_EQ(m.targets[0].mae, 1.0);
    EXPECT_DOUBLE_EQ(m.avg_mse, 1.0);

    RidgeModel perfect;
    perfect.coefficients = Matrix(2, 1, 0.0);
    perfect.coefficients(1, 0) = 1.0;
    EXPECT_EQ(evaluate(ForecastModel{perfect}, d, Split::val).avg_mse, 0.0);
    EXPECT_THROW(evaluate(ForecastModel{perfect}, d, Split::train), Error);
    EXPECT_THROW(evaluate(ForecastModel{perfect}, d, Split::test), Error);
    EXPECT_DOUBLE_EQ(average_mse({{"a", 0.65, 0}, {"b", 0.91, 0}}), 0.78);
}

TEST(Evaluate, NeverReadsTrainWindows) {
    Rng rng(2);
    Matrix x(10, 1), y(10, 1);
    for (auto& v : x.data) v = standard_normal(rng);
    for (auto& v : y.data) v = standard_normal(rng);
    std::vector<Split> s(10, Split::val);
    for (std::size_t i = 0; i < 10; i += 2) s[i] = Split::train;
    auto d = test::make_linear_data(x, y, s);
    RidgeModel m;
    m.coefficients = Matrix(2, 1, 0.5);
    const auto before = evaluate(ForecastModel{m}, d, Split::val);
    for (std::size_t i = 0; i < 10; i += 2) {
        d.features(i, 0) = std::nan("");
        d.windows.targets(i, 0) = std::nan("");
    }
    EXPECT_EQ(evaluate(ForecastModel{m}, d, Split::val), before);
}

TEST(TrainAndScore, RidgeIsDeterministic) {
    std::vector<Split> s(80, Split::train);
    for (std::size_t i = 60; i < 70; ++i) s[i] = Split::val;
    for (std::size_t i = 70; i < 80; ++i) s[i] = Split::test;
    const auto d = random_linear_problem(80, 4, 2, 0.3, 9, s);
    TrainConfig c;
    c.patch_len = 1;
    const auto a = train_and_score(iota_n(60), d, c, true);
    const auto b = train_and_score(iota_n(60), d, c, true);
    EXPECT_EQ(a.val, b.val);
    ASSERT_TRUE(a.test);
    EXPECT_EQ(*a.test, *b.test);
    EXPECT_EQ(a.val.targets.size(), 2u);
}

TEST(TrainAndScore, PatchNetIsDeterministicAndAccountsTokens) {
    Rng rng(10);
    RawTable table;
    table.column_names = {"u", "v", "y"};
    table.roles = {ColumnRole::input, ColumnRole::input, ColumnRole::target};
    const std::size_t rows = 40;
    table.values = Matrix(rows * 3, 3);
    for (std::size_t p = 0; p < 3; ++p) {
        for (std::size_t r = 0; r < rows; ++r) {
            const std::size_t i = p * rows + r;
            table.values(i, 0) = standard_normal(rng);
            table.values(i, 1) = standard_normal(rng);
            table.values(i, 2) = 0.5 * table.values(i, 0);
            table.profile_ids.push_back(static_cast<std::int64_t>(p));
            table.splits.push_back(p == 0 ? Split::train : (p == 1 ? Split::val : Split::test));
        }
    }
    const auto d = prepare_training_data(make_windows(table, 8, 1));
    TrainConfig c;
    c.kind = TrainerKind::patch_net;
    c.patch_len = 4;
    c.batch_size = 7;
    c.token_budget = 1000;
    c.hidden = 4;
    c.embed_dim = 4;
    c.peak_lr = 1e-2;
    const auto train = d.windows.indices(Split::train);
    const auto a = train_and_score(train, d, c, true);
    const auto b = train_and_score(train, d, c, true);
    EXPECT_EQ(a.val, b.val);
    EXPECT_GE(a.val.tokens, c.token_budget);
    EXPECT_LT(a.val.tokens, c.token_budget + c.batch_size * 2);
    EXPECT_EQ(a.val.epochs, compute_epochs(1000, train.size(), 2));
    c.seed = 1;
    EXPECT_NE(train_and_score(train, d, c, false).val, a.val);
}
