#include "alarm_pipeline/error.hpp"
#include "alarm_pipeline/synth.hpp"
#include "alarm_pipeline/tuning.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

using namespace alarm_pipeline;

namespace {

std::vector<Database> corpus_of(const SynthCorpus& c)
{
    return pair_corpus(c.annotations, c.streams);
}

std::vector<Database> corpus_of(const SynthSpec& spec)
{
    return corpus_of(generate(spec));
}

SynthSpec dip_spec(std::uint64_t seed)
{
    SynthSpec s;
    s.database_id = "dips";
    s.video_count = 12;
    s.frames_per_video = 600;
    s.fall_rate = 1.5;
    s.fall_duration = {40, 8};
    s.far_fp_rate = 2.0;
    s.fp_duration = {4, 2};
    s.seed = seed;
    return s;
}

TuningConstraints unconstrained()
{
    TuningConstraints c;
    c.min_alarm_precision = 0.0;
    c.max_sensitivity_drop = 1e9;
    return c;
}

const double kBetas[] = {0.5, 2.0};

} // namespace

TEST(ParseRange, InclusiveAndRounded)
{
    EXPECT_EQ(parse_range("0.1:0.9:0.1"), (std::vector<double>{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9}));
    EXPECT_EQ(parse_range("0.05:2:0.05").size(), 40u);
    EXPECT_EQ(parse_range("0.05:2:0.05").back(), 2.0);
    EXPECT_EQ(parse_range("0.5:0.5:0.1"), std::vector<double>{0.5});
    EXPECT_THROW(parse_range("0.1:0.9"), InputError);
    EXPECT_THROW(parse_range("0.9:0.1:0.1"), InputError);
    EXPECT_THROW(parse_range("0.1:0.9:0"), InputError);
    EXPECT_THROW(parse_range("a:b:c"), InputError);
}

TEST(GridSpec, Defaults)
{
    const auto g = GridSpec::defaults();
    ASSERT_EQ(g.widths.size(), 40u);
    EXPECT_EQ(g.widths.front(), FilterWidth::seconds(0.05));
    EXPECT_EQ(g.widths.back(), FilterWidth::seconds(2.0));
    EXPECT_EQ(g.thresholds.size(), 9u);
}

TEST(Sweep, SingleCellEqualsBaselineEvaluation)
{
    const auto dbs = corpus_of(dip_spec(3));
    const GridSpec grid{{FilterWidth::frames(1)}, {0.5}};
    const auto sg = sweep(dbs, grid, kBetas, {});
    ASSERT_EQ(sg.cells.size(), 1u);
    const auto direct = evaluate_database(dbs[0], {FilterWidth::frames(1), 0.5}, {}, kBetas);
    EXPECT_EQ(to_json(sg.cells[0].report).dump(), to_json(direct.report).dump());
}

TEST(Sweep, FilteringRemovesShortDips)
{
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const auto dbs = corpus_of(dip_spec(seed));
        const GridSpec grid{{FilterWidth::frames(1), FilterWidth::seconds(0.5)}, {0.5}};
        const auto sg = sweep(dbs, grid, kBetas, {});
        ASSERT_EQ(sg.cells.size(), 2u);
        const auto& raw = sg.cells[0].report;
        const auto& filtered = sg.cells[1].report;
        EXPECT_GT(raw.alarm.fp, 0);
        EXPECT_EQ(filtered.alarm.fp, 0);
        EXPECT_GT(*filtered.f_beta.at(0.5), *raw.f_beta.at(0.5));
    }
}

TEST(Sweep, CleanCorpusFBetaDoesNotFallAsThresholdRises)
{
    // Fall iff filtered score < T: raising T only adds Fall labels, which on a
    // clean corpus can only grow detections.
    SynthSpec s;
    s.database_id = "clean";
    s.video_count = 8;
    s.frames_per_video = 900;
    s.fall_rate = 2.0;
    s.far_offset_min = 120;
    s.seed = 4;
    const auto dbs = corpus_of(s);
    const auto sg = sweep(dbs, GridSpec::defaults(), kBetas, {});
    const auto cells = sg.cells_for("clean");
    const std::size_t nt = sg.grid.thresholds.size();
    for (std::size_t w = 0; w < sg.grid.widths.size(); ++w) {
        for (double beta : kBetas) {
            double prev = -1.0;
            for (std::size_t t = 0; t < nt; ++t) {
                const Metric f = cells[w * nt + t]->report.f_beta.at(beta);
                const double v = f.value_or(0.0);
                EXPECT_GE(v, prev - 1e-12) << sg.grid.widths[w].to_string() << " T=" << sg.grid.thresholds[t];
                prev = v;
            }
        }
    }
    // Identity filter: perfect at every threshold.
    const auto id = sweep(dbs, GridSpec{{FilterWidth::frames(1)}, sg.grid.thresholds}, kBetas, {});
    for (const auto& c : id.cells)
        EXPECT_EQ(*c.report.f_beta.at(0.5), 1.0);
}

TEST(Sweep, CellsAgreeWithMetricsAndAreThreadIndependent)
{
    const auto dbs = corpus_of(generate(default_synthetic_corpus(5)));
    GridSpec grid{{}, {0.2, 0.5, 0.8}};
    for (double w : {0.05, 0.3, 0.85, 1.5})
        grid.widths.push_back(FilterWidth::seconds(w));
    const auto one = sweep(dbs, grid, kBetas, {}, 1);
    const auto four = sweep(dbs, grid, kBetas, {}, 4);
    ASSERT_EQ(one.cells.size(), dbs.size() * 4 * 3);
    for (std::size_t i = 0; i < one.cells.size(); ++i) {
        const auto& r = one.cells[i].report;
        for (double beta : kBetas) {
            const Metric want = f_beta(r.p_a, r.se_a, beta);
            ASSERT_EQ(r.f_beta.at(beta).has_value(), want.has_value());
            if (want) {
                EXPECT_EQ(*r.f_beta.at(beta), *want);
            }
        }
        EXPECT_EQ(to_json(r).dump(), to_json(four.cells[i].report).dump());
    }
}

TEST(Sweep, SkipsEmptyDatabasesAndWritesOneRowPerCell)
{
    auto dbs = corpus_of(dip_spec(2));
    dbs.push_back({"empty", {}});
    GridSpec grid{{FilterWidth::frames(1), FilterWidth::seconds(0.25)}, {0.3, 0.6, 0.9}};
    const auto sg = sweep(dbs, grid, kBetas, {});
    EXPECT_EQ(sg.skipped_databases, std::vector<std::string>{"empty"});
    std::ostringstream csv;
    write_sweep_csv(csv, sg);
    std::istringstream in(csv.str());
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line, "database_id,beta,W_seconds,T_pred,f_beta,p_a,se_a,TP_a,FP_a,FN_a");
    std::size_t rows = 0;
    while (std::getline(in, line))
        ++rows;
    EXPECT_EQ(rows, 1u * 2 * 2 * 3);
}

TEST(Argmax, SingleCellGrid)
{
    const auto dbs = corpus_of(dip_spec(8));
    const GridSpec grid{{FilterWidth::seconds(0.5)}, {0.5}};
    const auto sg = sweep(dbs, grid, kBetas, {});
    TuningConstraints c;
    c.baseline_se_a = baseline_sensitivity(dbs, {});
    const auto opt = per_database_argmax(sg, 0.5, c);
    ASSERT_EQ(opt.size(), 1u);
    ASSERT_TRUE(opt[0].feasible());
    EXPECT_EQ(opt[0].best->width, FilterWidth::seconds(0.5));

    c.min_alarm_precision = 0.99999;
    const auto raw = sweep(dbs, GridSpec{{FilterWidth::frames(1)}, {0.5}}, kBetas, {});
    EXPECT_FALSE(per_database_argmax(raw, 0.5, c)[0].feasible());
    EXPECT_THROW(per_database_argmax(sg, 1.0, c), InputError);
}

TEST(Argmax, UnconstrainedEqualsBruteForceMaximum)
{
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
        auto spec = dip_spec(seed);
        spec.score_noise = 0.25;
        spec.near_fall_fp_rate = 1.0;
        const auto dbs = corpus_of(spec);
        const auto sg = sweep(dbs, GridSpec::defaults(), kBetas, {});
        for (double beta : kBetas) {
            const auto opt = per_database_argmax(sg, beta, unconstrained());
            ASSERT_TRUE(opt[0].feasible());
            const SweepCell* best = nullptr;
            for (const auto& c : sg.cells) {
                const Metric f = c.report.f_beta.at(beta);
                if (f && (!best || *f > *best->report.f_beta.at(beta)))
                    best = &c;
            }
            ASSERT_NE(best, nullptr);
            EXPECT_EQ(opt[0].best->width, best->width);
            EXPECT_EQ(opt[0].best->threshold, best->threshold);
        }
    }
}

TEST(Argmax, RecoversPlantedFilterWidth)
{
    // Dips of exactly d frames at 0.1 vanish once (W - d + 0.1 d) / W >= 0.5,
    // i.e. W >= 1.8 d frames. Long falls stay detected at every width.
    for (Frame d : {3, 5, 8}) {
        SynthSpec s;
        s.database_id = "planted";
        s.video_count = 10;
        s.frames_per_video = 1200;
        s.fall_rate = 2.0;
        s.fall_duration = {90, 0};
        s.far_fp_rate = 3.0;
        s.fp_duration = {d, 0};
        s.far_offset_min = 80;
        s.seed = static_cast<std::uint64_t>(d);
        const auto dbs = corpus_of(s);
        GridSpec grid = GridSpec::defaults();
        grid.thresholds = {0.5};
        const auto sg = sweep(dbs, grid, kBetas, {});
        TuningConstraints c;
        c.baseline_se_a = baseline_sensitivity(dbs, {});
        const auto opt = per_database_argmax(sg, 0.5, c);
        ASSERT_TRUE(opt[0].feasible());
        const double planted = std::ceil(1.8 * static_cast<double>(d)) / s.fps;
        EXPECT_NEAR(opt[0].best->width.value(), planted, 0.05 + 1e-9) << d;
        EXPECT_EQ(opt[0].f_beta(), 1.0);
    }
}

TEST(Argmax, NeverViolatesConstraintsAndIsStableOnSubgrids)
{
    std::mt19937_64 rng(77);
    for (int trial = 0; trial < 6; ++trial) {
        auto spec = dip_spec(100 + static_cast<std::uint64_t>(trial));
        spec.score_noise = 0.1 + 0.05 * trial;
        spec.near_fall_fp_rate = 0.8;
        const auto dbs = corpus_of(spec);
        const auto sg = sweep(dbs, GridSpec::defaults(), kBetas, {});
        TuningConstraints c;
        c.min_alarm_precision = 0.5 + 0.08 * trial;
        c.max_sensitivity_drop = 5.0 * trial;
        c.baseline_se_a = baseline_sensitivity(dbs, {});
        const auto opt = per_database_argmax(sg, 0.5, c);
        const Metric base = c.baseline_se_a.at(spec.database_id);
        double best_f = -1.0;
        for (const auto& cell : sg.cells) {
            if (satisfies(cell.report, base, c) && cell.report.f_beta.at(0.5))
                best_f = std::max(best_f, *cell.report.f_beta.at(0.5));
        }
        if (!opt[0].feasible()) {
            EXPECT_EQ(best_f, -1.0);
            continue;
        }
        const auto& r = opt[0].best->report;
        EXPECT_TRUE(satisfies(r, base, c));
        EXPECT_GE(*r.p_a, c.min_alarm_precision);
        EXPECT_LE((*base - *r.se_a) * 100.0, c.max_sensitivity_drop + 1e-6);
        EXPECT_EQ(opt[0].f_beta(), best_f);

        // Random subgrid that keeps the optimum.
        GridSpec sub;
        for (const auto& w : sg.grid.widths) {
            if (w == opt[0].best->width || rng() % 3 == 0)
                sub.widths.push_back(w);
        }
        for (double t : sg.grid.thresholds) {
            if (t == opt[0].best->threshold || rng() % 2 == 0)
                sub.thresholds.push_back(t);
        }
        const auto again = per_database_argmax(sweep(dbs, sub, kBetas, {}), 0.5, c);
        ASSERT_TRUE(again[0].feasible());
        EXPECT_EQ(again[0].best->width, opt[0].best->width);
        EXPECT_EQ(again[0].best->threshold, opt[0].best->threshold);
    }
}

namespace {

DatabaseOptimum optimum(const std::string& id, double w, double t)
{
    DatabaseOptimum o;
    o.database_id = id;
    o.best = SweepCell{id, FilterWidth::seconds(w), t, {}};
    return o;
}

const std::vector<double> kThresholds{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};

} // namespace

TEST(AverageOptima, Examples)
{
    std::vector<DatabaseOptimum> three{optimum("a", 0.8, 0.4), optimum("b", 0.9, 0.4), optimum("c", 0.91, 0.4)};
    auto f = average_optima(three, kThresholds);
    EXPECT_NEAR(f.width_seconds, 0.87, 1e-12);
    EXPECT_EQ(f.threshold, 0.4);

    const std::vector<DatabaseOptimum> one{optimum("a", 0.35, 0.7)};
    f = average_optima(one, kThresholds);
    EXPECT_EQ(f.width_seconds, 0.35);
    EXPECT_EQ(f.threshold, 0.7);

    const std::vector<DatabaseOptimum> pair{optimum("a", 0.5, 0.3), optimum("b", 1.5, 0.5)};
    f = average_optima(pair, kThresholds);
    EXPECT_EQ(f.width_seconds, 1.0);
    EXPECT_NEAR(f.threshold, 0.4, 1e-12);
}

TEST(AverageOptima, SkipsInfeasibleAndFailsWhenNoneFeasible)
{
    std::vector<DatabaseOptimum> opts{optimum("a", 0.4, 0.2), {"b", std::nullopt, 0.5}};
    EXPECT_EQ(average_optima(opts, kThresholds).width_seconds, 0.4);
    const std::vector<DatabaseOptimum> none{{"a", std::nullopt, 0.5}, {"b", std::nullopt, 0.5}};
    EXPECT_THROW(average_optima(none, kThresholds), InfeasibleError);
    EXPECT_THROW(average_optima(std::vector<DatabaseOptimum>{}, kThresholds), InfeasibleError);
}

TEST(AverageOptima, PermutationInvariant)
{
    std::mt19937_64 rng(5);
    std::uniform_int_distribution<int> wk(1, 40), tk(1, 9);
    for (int trial = 0; trial < 500; ++trial) {
        std::vector<DatabaseOptimum> opts;
        const int n = 1 + trial % 5;
        for (int i = 0; i < n; ++i)
            opts.push_back(optimum("d" + std::to_string(i), wk(rng) / 20.0, tk(rng) / 10.0));
        const auto a = average_optima(opts, kThresholds);
        std::shuffle(opts.begin(), opts.end(), rng);
        const auto b = average_optima(opts, kThresholds);
        EXPECT_NEAR(a.width_seconds, b.width_seconds, 1e-12);
        EXPECT_EQ(a.threshold, b.threshold);
    }
}
