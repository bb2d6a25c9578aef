#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "fedsim/config.hpp"
#include "fedsim/engine.hpp"
#include "fedsim/errors.hpp"
#include "fedsim/local_solver.hpp"

using namespace fedsim;

namespace {

Vec vec1(double x) {
    Vec v(1);
    v << x;
    return v;
}

ExperimentConfig small_config() {
    ExperimentConfig c;
    c.clients = 2;
    c.dim = 1;
    c.rounds = 10;
    c.replicates = 2;
    c.sample_count = 2;
    c.eta = 0.01;
    c.seed = 5;
    c.calibrate = false;
    c.schedule = StaticSchedule{{1, 3}, {0.5, 0.0}};
    c.anchors.gaussian = false;
    c.anchors.explicit_anchors = {vec1(0.0), vec1(1.0)};
    c.algorithms = {{"fedavg", Method::FedAvg, SolverSpec::plain()}};
    return c;
}

}  // namespace

TEST_CASE("config validation rejects each malformed field") {
    auto bad = [](auto&& mutate) {
        auto c = small_config();
        mutate(c);
        CHECK_THROWS_AS(validate_config(c), ValidationError);
    };
    bad([](ExperimentConfig& c) { c.clients = 0; });
    bad([](ExperimentConfig& c) { c.dim = 0; });
    bad([](ExperimentConfig& c) { c.rounds = 0; });
    bad([](ExperimentConfig& c) { c.replicates = 0; });
    bad([](ExperimentConfig& c) { c.sample_count = 0; });
    bad([](ExperimentConfig& c) { c.eta = 0.0; });
    bad([](ExperimentConfig& c) { c.sigma_sq = -1.0; });
    bad([](ExperimentConfig& c) { c.record_every = 0; });
    bad([](ExperimentConfig& c) { c.blowup_guard = 0.0; });
    bad([](ExperimentConfig& c) { c.jobs = 0; });
    bad([](ExperimentConfig& c) { c.weights = {0.5}; });
    bad([](ExperimentConfig& c) { c.weights = {0.6, 0.6}; });
    bad([](ExperimentConfig& c) { c.weights = {1.5, -0.5}; });
    bad([](ExperimentConfig& c) { c.algorithms.clear(); });
    bad([](ExperimentConfig& c) { c.algorithms[0].label = ""; });
    bad([](ExperimentConfig& c) { c.algorithms.push_back(c.algorithms[0]); });
    bad([](ExperimentConfig& c) { c.schedule = StaticSchedule{{1, 2, 3}, {0.0}}; });
    bad([](ExperimentConfig& c) { c.anchors.explicit_anchors.pop_back(); });
    bad([](ExperimentConfig& c) { c.anchors.explicit_anchors[0] = Vec::Zero(2); });
    {
        auto c = small_config();
        c.schedule = StaticSchedule{{1}, {1.0}};
        CHECK_THROWS_AS(validate_config(c), BadSchedule);
        c.schedule = TwoGroupSchedule{-1, {}, {}};
        CHECK_THROWS_AS(validate_config(c), ValidationError);
    }
    CHECK_NOTHROW(validate_config(small_config()));
}

TEST_CASE("weights default to uniform when omitted") {
    auto c = small_config();
    c.clients = 4;
    auto w = resolved_weights(c);
    REQUIRE(w.size() == 4);
    for (double v : w) {
        CHECK(v == Catch::Approx(0.25).margin(1e-15));
    }
    c.weights = {0.7, 0.1, 0.1, 0.1};
    CHECK(resolved_weights(c)[0] == 0.7);
}

TEST_CASE("explicit anchors pass through to the problem") {
    auto c = small_config();
    auto p = build_problem(c);
    CHECK(p.anchors[0](0) == 0.0);
    CHECK(p.anchors[1](0) == 1.0);
    CHECK(p.sigma_sq == c.sigma_sq);
}

TEST_CASE("gaussian anchors replay from the seed and differ across clients") {
    auto c = small_config();
    c.anchors = AnchorPolicy{};
    c.clients = 3;
    c.dim = 4;
    c.schedule = StaticSchedule{{1}, {0.0}};
    auto p1 = build_problem(c);
    auto p2 = build_problem(c);
    REQUIRE(p1.anchors.size() == 3);
    for (int m = 0; m < 3; ++m) {
        CHECK((p1.anchors[static_cast<std::size_t>(m)] -
               p2.anchors[static_cast<std::size_t>(m)])
                  .norm() == 0.0);
    }
    CHECK((p1.anchors[0] - p1.anchors[1]).norm() > 1e-6);
    c.seed = 6;
    auto p3 = build_problem(c);
    CHECK((p1.anchors[0] - p3.anchors[0]).norm() > 1e-12);
}

TEST_CASE("population profiles carry the configured static plans") {
    auto c = small_config();
    auto pop = build_population(c, c.algorithms[0], 0);
    REQUIRE(pop.size() == 2);
    CHECK(pop[0].id == 0);
    CHECK(pop[1].id == 1);
    CHECK(pop[0].weight == Catch::Approx(0.5));
    CHECK(pop[0].schedule(0).local_steps == 1);
    CHECK(pop[0].schedule(0).failure_prob == 0.5);
    CHECK(pop[1].schedule(0).local_steps == 3);
    CHECK(pop[1].schedule(0).failure_prob == 0.0);
}

TEST_CASE("scalar static plans broadcast to every client") {
    auto c = small_config();
    c.clients = 5;
    c.anchors.gaussian = true;
    c.anchors.explicit_anchors.clear();
    c.schedule = StaticSchedule{{7}, {0.25}};
    auto pop = build_population(c, c.algorithms[0], 0);
    for (const auto& profile : pop) {
        CHECK(profile.schedule(3).local_steps == 7);
        CHECK(profile.schedule(3).failure_prob == 0.25);
    }
}

TEST_CASE("completed link budgets follow the solver's accumulation mass") {
    auto c = small_config();
    c.schedule = CodesignSchedule{{2, 3}, 0.01};
    for (const auto& solver :
         {SolverSpec::plain(), SolverSpec::momentum(0.3), SolverSpec::decayed(0.1)}) {
        AlgorithmSpec algo{"a", Method::FedAvg, solver};
        auto pop = build_population(c, algo, 0);
        double l1_0 = accumulation_l1(solver, 2, c.eta);
        double l1_1 = accumulation_l1(solver, 3, c.eta);
        double q0 = pop[0].schedule(0).failure_prob;
        double q1 = pop[1].schedule(0).failure_prob;
        CHECK(q0 == Catch::Approx(0.01).margin(1e-14));
        // The completed budget balances delivered work across clients.
        CHECK((1.0 - q0) * l1_0 == Catch::Approx((1.0 - q1) * l1_1).epsilon(1e-12));
    }
    // Plain descent with steps (2, 3): q1 = 1 - 0.99 * 2 / 3 = 0.34.
    auto pop = build_population(c, c.algorithms[0], 0);
    CHECK(pop[1].schedule(0).failure_prob == Catch::Approx(0.34).margin(1e-12));
}

TEST_CASE("static heterogeneity is shared by replicates and algorithms") {
    auto c = small_config();
    c.clients = 6;
    c.anchors.gaussian = true;
    c.anchors.explicit_anchors.clear();
    c.schedule = UniformSchedule{{1, 30}, {0.0, 0.5}, false};
    AlgorithmSpec other{"fedacs", Method::FedAcs, SolverSpec::plain()};
    auto a = build_population(c, c.algorithms[0], 0);
    auto b = build_population(c, other, 7);
    for (int m = 0; m < 6; ++m) {
        auto s = static_cast<std::size_t>(m);
        CHECK(a[s].schedule(0).local_steps == b[s].schedule(0).local_steps);
        CHECK(a[s].schedule(0).failure_prob == b[s].schedule(0).failure_prob);
    }
}

TEST_CASE("per-round redraws differ across replicates but not algorithms") {
    auto c = small_config();
    c.clients = 4;
    c.anchors.gaussian = true;
    c.anchors.explicit_anchors.clear();
    c.schedule = UniformSchedule{{1, 30}, {0.0, 0.5}, true};
    AlgorithmSpec other{"fedacs", Method::FedAcs, SolverSpec::plain()};
    auto rep0 = build_population(c, c.algorithms[0], 0);
    auto rep0_again = build_population(c, other, 0);
    auto rep1 = build_population(c, c.algorithms[0], 1);
    bool same_all = true;
    bool diff_somewhere = false;
    for (int m = 0; m < 4; ++m) {
        auto s = static_cast<std::size_t>(m);
        for (std::int64_t r = 0; r < 8; ++r) {
            auto p0 = rep0[s].schedule(r);
            auto p0b = rep0_again[s].schedule(r);
            auto p1 = rep1[s].schedule(r);
            same_all = same_all && p0.local_steps == p0b.local_steps &&
                       p0.failure_prob == p0b.failure_prob;
            diff_somewhere = diff_somewhere || p0.local_steps != p1.local_steps ||
                             p0.failure_prob != p1.failure_prob;
        }
    }
    CHECK(same_all);
    CHECK(diff_somewhere);
}

TEST_CASE("per-method round statistics reflect what each aggregator corrects") {
    std::vector<double> p{0.5, 0.5};
    std::vector<double> q{0.4, 0.0};
    std::vector<double> l1{2.0, 2.0};
    std::vector<double> w{0.5, 0.5};

    // Homogeneous computation: inverse-probability weighting restores the
    // data weights exactly, while plain averaging keeps the delivery skew.
    auto ca = round_stats_for_method(Method::CaFedAvg, p, q, l1, w);
    CHECK(ca.chi_square < 1e-15);
    CHECK(ca.eta_eff_factor == 1.0);
    CHECK(ca.t_eff == Catch::Approx(2.0).margin(1e-14));
    auto plain = round_stats_for_method(Method::FedAvg, p, q, l1, w);
    CHECK(plain.chi_square > 1e-3);

    // Heterogeneous computation with perfect links: update normalization
    // leaves only the (here absent) delivery skew.
    std::vector<double> q0{0.0, 0.0};
    std::vector<double> l1h{1.0, 3.0};
    auto nova = round_stats_for_method(Method::FedNova, p, q0, l1h, w);
    CHECK(nova.chi_square < 1e-15);
    for (std::size_t m = 0; m < 2; ++m) {
        CHECK(nova.omega_eff[m] == nova.gamma[m]);
    }
    auto plain2 = round_stats_for_method(Method::FedAvg, p, q0, l1h, w);
    CHECK(plain2.chi_square > 1e-3);
}

TEST_CASE("experiments replay bit-identically from one seed") {
    auto c = small_config();
    c.algorithms.push_back({"fedacs", Method::FedAcs, SolverSpec::plain()});
    c.sigma_sq = 0.01;
    auto runs1 = run_experiment(c);
    auto runs2 = run_experiment(c);
    CHECK(render_csv(runs1) == render_csv(runs2));
    REQUIRE(runs1.size() == 2);
    REQUIRE(runs1[0].replicates.size() == 2);
    for (std::size_t ai = 0; ai < 2; ++ai) {
        for (std::size_t rep = 0; rep < 2; ++rep) {
            CHECK((runs1[ai].replicates[rep].final_model -
                   runs2[ai].replicates[rep].final_model)
                      .norm() == 0.0);
        }
    }
}

TEST_CASE("parallel execution matches the sequential order exactly") {
    auto c = small_config();
    c.clients = 4;
    c.anchors.gaussian = true;
    c.anchors.explicit_anchors.clear();
    c.replicates = 4;
    c.rounds = 50;
    c.sigma_sq = 0.05;
    c.schedule = UniformSchedule{{1, 10}, {0.0, 0.4}, true};
    c.algorithms.push_back({"fedacs", Method::FedAcs, SolverSpec::momentum(0.2)});
    auto seq = c;
    seq.jobs = 1;
    auto par = c;
    par.jobs = 3;
    CHECK(render_csv(run_experiment(seq)) == render_csv(run_experiment(par)));
}

TEST_CASE("records appear on the configured cadence") {
    auto c = small_config();
    c.rounds = 10;
    c.record_every = 4;
    c.replicates = 1;
    auto runs = run_experiment(c);
    REQUIRE(runs.size() == 1);
    const auto& recs = runs[0].replicates[0].records;
    REQUIRE(recs.size() == 4);
    CHECK(recs[0].round == 0);
    CHECK(recs[1].round == 4);
    CHECK(recs[2].round == 8);
    CHECK(recs[3].round == 9);
    for (const auto& r : recs) {
        CHECK(r.selected.total() == c.sample_count);
        CHECK(r.selected.contains(r.delivered));
        CHECK(r.metrics.count("dist_true") == 1);
        CHECK(r.metrics.count("dist_surrogate") == 1);
        CHECK(r.metrics.count("grad_norm_sq") == 1);
        CHECK(r.metrics.count("chi_square") == 1);
        CHECK(r.metrics.count("eta_eff") == 1);
        CHECK(r.metrics.count("t_eff") == 1);
    }
}

TEST_CASE("final model agrees with the last recorded distance") {
    auto c = small_config();
    c.replicates = 1;
    c.rounds = 25;
    c.record_every = 1;
    auto runs = run_experiment(c);
    const auto& rep = runs[0].replicates[0];
    auto problem = build_problem(c);
    Vec opt = problem.true_optimum(resolved_weights(c));
    double dist = (rep.final_model - opt).norm();
    CHECK(rep.records.back().metrics.at("dist_true") == Catch::Approx(dist).margin(1e-12));
}

TEST_CASE("descent drives a single client onto its anchor") {
    // One client removes all sampling noise, so the run is pure gradient
    // descent and must land on the anchor.
    auto c = small_config();
    c.clients = 1;
    c.rounds = 2000;
    c.replicates = 1;
    c.eta = 0.05;
    c.record_every = 2000;
    c.schedule = StaticSchedule{{2}, {0.0}};
    c.anchors.explicit_anchors = {vec1(0.5)};
    auto runs = run_experiment(c);
    const auto& rep = runs[0].replicates[0];
    CHECK(std::abs(rep.final_model(0) - 0.5) < 1e-6);
}

TEST_CASE("inverse-probability weighting on perfect links replays plain averaging") {
    // Both methods see identical streams when each runs as the sole
    // algorithm; with q = 0 and homogeneous steps their trajectories match
    // bit for bit.
    auto base = small_config();
    base.schedule = StaticSchedule{{2}, {0.0}};
    base.rounds = 40;
    base.sigma_sq = 0.02;
    auto ca = base;
    ca.algorithms = {{"m", Method::CaFedAvg, SolverSpec::plain()}};
    auto plain = base;
    plain.algorithms = {{"m", Method::FedAvg, SolverSpec::plain()}};
    auto ra = run_experiment(ca);
    auto rp = run_experiment(plain);
    CHECK((ra[0].replicates[0].final_model - rp[0].replicates[0].final_model).norm() == 0.0);
    CHECK((ra[0].replicates[1].final_model - rp[0].replicates[1].final_model).norm() == 0.0);
}

TEST_CASE("normalized averaging with homogeneous work replays plain averaging") {
    auto base = small_config();
    base.schedule = StaticSchedule{{3}, {0.2}};
    base.rounds = 40;
    auto nova = base;
    nova.algorithms = {{"m", Method::FedNova, SolverSpec::plain()}};
    auto plain = base;
    plain.algorithms = {{"m", Method::FedAvg, SolverSpec::plain()}};
    auto rn = run_experiment(nova);
    auto rp = run_experiment(plain);
    CHECK((rn[0].replicates[0].final_model - rp[0].replicates[0].final_model).norm() < 1e-12);
}

TEST_CASE("memory aggregation with perfect links replays plain averaging") {
    auto base = small_config();
    base.schedule = StaticSchedule{{1, 3}, {0.0, 0.0}};
    base.rounds = 40;
    auto varp = base;
    varp.algorithms = {{"m", Method::FedVarp, SolverSpec::plain()}};
    auto plain = base;
    plain.algorithms = {{"m", Method::FedAvg, SolverSpec::plain()}};
    auto rv = run_experiment(varp);
    auto rp = run_experiment(plain);
    CHECK((rv[0].replicates[0].final_model - rp[0].replicates[0].final_model).norm() == 0.0);
}

TEST_CASE("every method survives a small smoke run") {
    auto c = small_config();
    c.rounds = 20;
    c.sigma_sq = 0.01;
    c.algorithms = {{"a", Method::FedAvg, SolverSpec::plain()},
                    {"b", Method::FedAcs, SolverSpec::momentum(0.3)},
                    {"c", Method::CaFedAvg, SolverSpec::proximal(1.0)},
                    {"d", Method::FedVarp, SolverSpec::decayed(0.01)},
                    {"e", Method::FedNova, SolverSpec::plain()},
                    {"f", Method::OptimalSampling, SolverSpec::plain()}};
    auto runs = run_experiment(c);
    REQUIRE(runs.size() == 6);
    for (const auto& run : runs) {
        for (const auto& rep : run.replicates) {
            CHECK(rep.final_model.allFinite());
        }
    }
}

TEST_CASE("runaway steps raise the blowup error") {
    auto c = small_config();
    c.eta = 2.5;
    c.calibrate = false;
    c.rounds = 4000;
    c.schedule = StaticSchedule{{1}, {0.0}};
    CHECK_THROWS_AS(run_experiment(c), NumericalBlowup);
}

TEST_CASE("calibration rescales each method's step length") {
    // With calibration on, the recorded eta_eff uses the per-method step:
    // for the balanced sampler it is (49/24) eta times its delivered mass.
    auto c = small_config();
    c.calibrate = true;
    c.rounds = 2;
    c.replicates = 1;
    c.algorithms = {{"fedacs", Method::FedAcs, SolverSpec::plain()}};
    auto runs = run_experiment(c);
    double eta_eff = runs[0].replicates[0].records[0].metrics.at("eta_eff");
    // fedacs probabilities (6/7, 1/7) with q = (0.5, 0): factor = 4/7.
    double expect = 0.01 * (49.0 / 24.0) * (4.0 / 7.0);
    CHECK(eta_eff == Catch::Approx(expect).epsilon(1e-12));
}
