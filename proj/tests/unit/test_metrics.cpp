#include <cmath>
#include <random>

#include "doctest.h"
#include "json.hpp"
#include "odflow/errors.hpp"
#include "odflow/metrics.hpp"
#include "odflow/trainer.hpp"
#include "test_support.hpp"

using namespace odflow;

TEST_SUITE("metrics") {
  TEST_CASE("hand computed values") {
    const std::vector<double> pred = {1.0, 0.0, 6.0, 2.0};
    const std::vector<double> act = {0.0, 3.0, 5.0, 9.0};
    // |1-0|/1, |0-3|/4, |6-5|/6, |2-9|/10
    CHECK(*mape(pred, act, 0) == doctest::Approx((1.0 + 0.75 + 1.0 / 6 + 0.7) / 4));
    CHECK(*mape(pred, act, 3) == doctest::Approx((0.75 + 1.0 / 6 + 0.7) / 3));
    CHECK(*mape(pred, act, 5) == doctest::Approx((1.0 / 6 + 0.7) / 2));
    CHECK(*mae(pred, act, 0) == doctest::Approx((1 + 3 + 1 + 7) / 4.0));
    CHECK(*mae(pred, act, 5) == doctest::Approx(4.0));
    CHECK(count_at_least(act, 3) == 3);
    CHECK_FALSE(mape(pred, act, 10));
    CHECK_FALSE(mae(pred, act, 10));
    CHECK_THROWS_AS(mape(pred, std::vector<double>{1.0}, 0), std::invalid_argument);
  }

  TEST_CASE("metric properties") {
    std::mt19937_64 rng(8);
    std::uniform_int_distribution<int> counts(0, 12);
    std::normal_distribution<double> noise(0, 2);
    for (int rep = 0; rep < 50; ++rep) {
      std::vector<double> act(30), pred(30);
      for (std::size_t i = 0; i < 30; ++i) {
        act[i] = counts(rng);
        pred[i] = std::max(0.0, act[i] + noise(rng));
      }
      const auto m = compute_metrics(pred, act);
      CHECK(m.counts.at(0) == 30);
      CHECK(m.counts.at(0) >= m.counts.at(3));
      CHECK(m.counts.at(3) >= m.counts.at(5));
      for (int k : kThresholds) {
        if (!m.mape.at(k)) continue;
        CHECK(*m.mape.at(k) >= 0.0);
        // the +1 denominator bounds mape by mae
        CHECK(*m.mape.at(k) <= *m.mae.at(k) + 1e-12);
      }
      // a perfect prediction scores zero
      CHECK(*compute_metrics(act, act).mape.at(0) == 0.0);
    }
  }

  TEST_CASE("split names") {
    CHECK(parse_eval_split("val") == EvalSplit::Validation);
    CHECK(parse_eval_split(to_string(EvalSplit::Train)) == EvalSplit::Train);
    CHECK_THROWS_AS(parse_eval_split("holdout"), ConfigError);
  }

  TEST_CASE("reports serialize nulls and the config echo") {
    Evaluation e;
    e.targets = 3;
    MetricReport r;
    r.task = Task::Od;
    r.model = compute_metrics(std::vector<double>{1, 2}, std::vector<double>{1, 1});
    r.baseline = r.model;
    e.reports.push_back(r);
    const auto j = nlohmann::json::parse(report_json(e, {R"({"seed":4})", "2026-01-01T00:00:00"}));
    REQUIRE(j.is_array());
    CHECK(j[0]["task"] == "od");
    CHECK(j[0]["mape"]["0"].get<double>() == doctest::Approx(0.25));
    CHECK(j[0]["mape"]["3"].is_null());
    CHECK(j[0]["counts"]["3"] == 0);
    CHECK(j[0]["baseline"]["mae"]["0"].get<double>() == doctest::Approx(0.5));
    CHECK(j[0]["config"]["seed"] == 4);
    CHECK(j[0]["config"]["split"] == "test");
    CHECK(j[0]["config"]["targets"] == 3);
    CHECK(j[0]["config"]["timestamp"] == "2026-01-01T00:00:00");
    const auto no_ts = nlohmann::json::parse(report_json(e, {}));
    CHECK_FALSE(no_ts[0]["config"].contains("timestamp"));

    const auto csv = report_csv(e);
    CHECK(csv.rfind("task,source,metric,threshold,value\n", 0) == 0);
    CHECK(csv.find("od,model,mape,0,0.25\n") != std::string::npos);
    CHECK(csv.find("od,model,mape,3,\n") != std::string::npos);
    CHECK(csv.find("od,baseline,count,0,2\n") != std::string::npos);
  }

  TEST_CASE("timestamps are ISO formatted") {
    const auto t = current_timestamp();
    CHECK(t.size() == 19);
    CHECK(t[10] == 'T');
  }

  TEST_CASE("evaluation scores model and historical average on the test days") {
    const auto store = odflow::testing::synthetic_store(3, 3, 10, 11);
    TrainConfig c;
    c.model.embed_dim = 1;
    c.model.hidden_dim = 8;
    c.model.heads = 1;
    c.model.demand_hidden = 4;
    c.model.history_hours = 3;
    c.model.use_prev_hour = c.model.use_next_hour = c.model.use_same_hour = false;
    c.epochs = 1;
    const auto trained = train(c, store);
    const auto e = evaluate(trained.best, store);
    REQUIRE(e.reports.size() == 2);
    CHECK(e.targets == 3 * 24);
    CHECK(e.reports[0].task == Task::Od);
    CHECK(e.reports[0].model.counts.at(0) == 3 * 24 * 81);
    CHECK(e.reports[1].model.counts.at(0) == 3 * 24 * 9);

    // baseline oracle: HA from training days 0..5 straight from the graphs
    std::vector<double> ha, act;
    const auto& seq = store.sequence;
    for (int d = 7; d < 10; ++d)
      for (int s = 1; s <= 24; ++s)
        for (std::size_t i = 0; i < 9; ++i) {
          double sum = 0.0;
          int n = 0;
          for (int t = 0; t < 6; ++t)
            if (seq.at(t, s).key().day_of_week == seq.at(d, s).key().day_of_week) {
              sum += demand_vector(seq.at(t, s))[i];
              ++n;
            }
          ha.push_back(n ? sum / n : 0.0);
          act.push_back(demand_vector(seq.at(d, s))[i]);
        }
    const auto expect = compute_metrics(ha, act);
    for (int k : kThresholds) {
      REQUIRE(expect.mape.at(k).has_value());
      CHECK(*e.reports[1].baseline.mape.at(k) == doctest::Approx(*expect.mape.at(k)));
      CHECK(*e.reports[1].baseline.mae.at(k) == doctest::Approx(*expect.mae.at(k)));
    }

    auto od_only = trained.best;
    od_only.config.task = Task::Od;
    const auto e2 = evaluate(od_only, store, EvalSplit::Validation);
    REQUIRE(e2.reports.size() == 1);
    CHECK(e2.targets == 24);
  }

  TEST_CASE("two-element examples") {
    const std::vector<double> pred = {3.0, 0.0};
    CHECK(*mape(pred, std::vector<double>{1.0, 1.0}, 0) == 0.75);
    CHECK(*mae(pred, std::vector<double>{1.0, 1.0}, 0) == 1.5);
    CHECK(*mape(pred, std::vector<double>{1.0, 5.0}, 5) == doctest::Approx(5.0 / 6.0).epsilon(1e-15));
    CHECK(*mape(pred, pred, 0) == 0.0);
    CHECK(*mae(pred, pred, 0) == 0.0);
  }

  TEST_CASE("the historical average scores zero on data equal to its averages") {
    // every day repeats the same slot graphs, so each average equals the data
    std::mt19937_64 rng(3);
    GraphStore store;
    store.grid = odflow::testing::small_grid(3, 3);
    const auto day = odflow::testing::random_sequence(9, 1, 24, rng, 0.4);
    store.sequence = odflow::testing::random_sequence(9, 12, 24, rng, 0.0);
    for (int d = 0; d < 12; ++d)
      for (int s = 1; s <= 24; ++s) {
        auto& g = store.sequence.graphs[std::size_t(d * 24 + s - 1)];
        g = SlotGraph::from_entries(g.key(), 9, day.at(0, s).entries());
      }
    TrainConfig c;
    c.model.embed_dim = 1;
    c.model.hidden_dim = 8;
    c.model.heads = 1;
    c.model.demand_hidden = 4;
    c.model.history_hours = 2;
    c.model.use_prev_hour = c.model.use_next_hour = c.model.use_same_hour = false;
    c.epochs = 1;
    const auto e = evaluate(train(c, store).best, store);
    for (const auto& r : e.reports) {
      CHECK(*r.baseline.mape.at(0) == 0.0);
      CHECK(*r.baseline.mae.at(0) == 0.0);
    }
  }
}
