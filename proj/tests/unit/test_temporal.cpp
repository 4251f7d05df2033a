#include <cmath>
#include <random>

#include "doctest.h"
#include "odflow/temporal.hpp"
#include "test_support.hpp"

using namespace odflow;
using tc::Tensor;
using tc::Var;
using odflow::testing::max_abs_diff;
using odflow::testing::random_tensor;

namespace {

Tensor mm(const Tensor& a, const Tensor& b) {
  Tensor out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j)
      for (std::size_t k = 0; k < a.cols(); ++k) out(i, j) += a(i, k) * b(k, j);
  return out;
}

// Per-cell reference: each cell attends over all n cells of every history
// slot, then channels are fused with a per-cell softmax.
Tensor reference_temporal(const ParamStore& s, const Tensor& query,
                          const std::vector<std::vector<Tensor>>& channels) {
  const std::size_t n = query.rows(), zp = s.at("temporal.slot.W_Q").value.rows();
  const double scale = 1.0 / std::sqrt(double(zp));
  const Tensor q = mm(query, s.at("temporal.slot.W_Q").value);
  std::vector<Tensor> reps;
  for (const auto& slots : channels) {
    Tensor rep(n, zp);
    for (const Tensor& hist : slots) {
      const Tensor k = mm(hist, s.at("temporal.slot.W_K").value);
      const Tensor v = mm(hist, s.at("temporal.slot.W_V").value);
      for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> w(n);
        double mx = -1e300, z = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
          double d = 0.0;
          for (std::size_t c = 0; c < zp; ++c) d += q(i, c) * k(j, c);
          w[j] = d * scale;
          mx = std::max(mx, w[j]);
        }
        for (double& x : w) z += (x = std::exp(x - mx));
        for (std::size_t j = 0; j < n; ++j)
          for (std::size_t c = 0; c < zp; ++c) rep(i, c) += w[j] / z * v(j, c);
      }
    }
    reps.push_back(rep);
  }
  const Tensor fq = mm(query, s.at("temporal.fusion.W_Q").value);
  Tensor out(n, zp);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> score;
    std::vector<Tensor> vals;
    for (const Tensor& rep : reps) {
      const Tensor k = mm(rep, s.at("temporal.fusion.W_K").value);
      double d = 0.0;
      for (std::size_t c = 0; c < zp; ++c) d += fq(i, c) * k(i, c);
      score.push_back(d * scale);
      vals.push_back(mm(rep, s.at("temporal.fusion.W_V").value));
    }
    const double mx = *std::max_element(score.begin(), score.end());
    double z = 0.0;
    for (double& x : score) z += (x = std::exp(x - mx));
    for (std::size_t r = 0; r < reps.size(); ++r)
      for (std::size_t c = 0; c < zp; ++c) out(i, c) += score[r] / z * vals[r](i, c);
  }
  return out;
}

struct Fixture {
  ModelConfig config;
  ParamStore store;
  std::mt19937_64 rng{23};
  Fixture() {
    config.embed_dim = 1;
    config.hidden_dim = 8;
    register_temporal_params(store, config, rng);
  }
};

}  // namespace

TEST_SUITE("temporal") {
  TEST_CASE("absolute slots and keys are inverse") {
    const SlotKey ref{10, 5, 3};
    for (long a : {0L, 1L, 23L, 24L, 250L, 1000L}) {
      const auto k = slot_key_at(a, 24, ref);
      CHECK(absolute_slot(k, 24) == a);
      CHECK(k.day_of_week == ((3 + (k.day_index - 10)) % 7 + 7) % 7);
    }
    CHECK(absolute_slot({2, 1, 0}, 24) == 48);
  }

  TEST_CASE("linear channels read the previous seven days") {
    const SlotKey t{10, 5, 3};
    const auto same = channel_slots(t, {ChannelKind::SameHour, 6}, 24);
    const auto prev = channel_slots(t, {ChannelKind::PrevHour, 6}, 24);
    const auto next = channel_slots(t, {ChannelKind::NextHour, 6}, 24);
    REQUIRE(same.size() == 7);
    for (int k = 1; k <= 7; ++k) {
      CHECK(same[k - 1] == SlotKey{10 - k, 5, ((3 - k) % 7 + 7) % 7});
      CHECK(prev[k - 1].slot == 4);
      CHECK(next[k - 1].slot == 6);
      CHECK(prev[k - 1].day_index == 10 - k);
    }
    // slot 1 of the previous hour wraps to slot 24 of the day before
    const auto wrap = channel_slots({8, 1, 0}, {ChannelKind::PrevHour, 6}, 24);
    CHECK(wrap[0] == SlotKey{6, 24, 5});
    const auto wrap_next = channel_slots({8, 24, 0}, {ChannelKind::NextHour, 6}, 24);
    CHECK(wrap_next[0] == SlotKey{8, 1, 0});
  }

  TEST_CASE("recent channel reads the h preceding slots, oldest first") {
    const auto r = channel_slots({1, 2, 1}, {ChannelKind::Recent, 3}, 24);
    REQUIRE(r.size() == 3);
    CHECK(r[0] == SlotKey{0, 23, 0});
    CHECK(r[1] == SlotKey{0, 24, 0});
    CHECK(r[2] == SlotKey{1, 1, 1});
    CHECK_THROWS_AS(channel_slots({0, 2, 0}, {ChannelKind::Recent, 3}, 24), std::out_of_range);
    CHECK_THROWS_AS(channel_slots({5, 2, 0}, {ChannelKind::SameHour, 3}, 24), std::out_of_range);
    CHECK_THROWS_AS(channel_slots({5, 2, 0}, {ChannelKind::Recent, 0}, 24), std::invalid_argument);
  }

  TEST_CASE("first eligible slot is the tightest channel requirement") {
    ModelConfig c;
    CHECK(first_eligible_slot(c, 24) == 7 * 24 + 1);
    c.use_prev_hour = false;
    CHECK(first_eligible_slot(c, 24) == 7 * 24);
    c.use_same_hour = false;
    CHECK(first_eligible_slot(c, 24) == 7 * 24 - 1);
    c.use_next_hour = false;
    c.history_hours = 9;
    CHECK(first_eligible_slot(c, 24) == 9);
    // every eligible target has all its channel slots at index >= 0
    ModelConfig all;
    const long first = first_eligible_slot(all, 24);
    for (const auto& spec : active_channels(all)) {
      CHECK_NOTHROW(channel_slots(slot_key_at(first, 24, {0, 1, 0}), spec, 24));
      CHECK_THROWS(channel_slots(slot_key_at(first - 1, 24, {0, 1, 0}), spec, 24));
      break;  // prev-hour is the binding channel
    }
  }

  TEST_CASE("active channels follow the config order") {
    ModelConfig c;
    auto a = active_channels(c);
    REQUIRE(a.size() == 4);
    CHECK(a[0].kind == ChannelKind::PrevHour);
    CHECK(a[3].kind == ChannelKind::Recent);
    c.use_next_hour = false;
    CHECK(active_channels(c).size() == 3);
  }

  TEST_CASE("temporal layer matches the per-cell reference") {
    Fixture f;
    const std::size_t n = 5, zp = 8;
    tc::Tape tape;
    const auto vars = bind_temporal(tape, f.store);
    const Tensor q = random_tensor(n, zp, f.rng);
    std::vector<std::vector<Tensor>> raw(3);
    std::vector<std::vector<Var>> channels(3);
    for (std::size_t c = 0; c < 3; ++c)
      for (std::size_t s = 0; s < c + 1; ++s) {
        raw[c].push_back(random_tensor(n, zp, f.rng));
        channels[c].push_back(tape.constant(raw[c].back()));
      }
    TemporalTrace trace;
    const Var out = temporal_layer(vars, tape.constant(q), channels, &trace);
    CHECK(max_abs_diff(out.value(), reference_temporal(f.store, q, raw)) < 1e-10);
    CHECK(trace.slot_weights.size() == 6);
    for (const auto& w : trace.slot_weights)
      for (std::size_t i = 0; i < n; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < n; ++j) s += w(i, j);
        CHECK(s == doctest::Approx(1.0));
      }
    REQUIRE(trace.fusion_weights.cols() == 3);
    for (std::size_t i = 0; i < n; ++i)
      CHECK(trace.fusion_weights(i, 0) + trace.fusion_weights(i, 1) + trace.fusion_weights(i, 2) ==
            doctest::Approx(1.0));
  }

  TEST_CASE("a single channel gets fusion weight one") {
    Fixture f;
    tc::Tape tape;
    const auto vars = bind_temporal(tape, f.store);
    const std::vector<std::vector<Var>> channels = {{tape.constant(random_tensor(4, 8, f.rng))}};
    TemporalTrace trace;
    temporal_layer(vars, tape.constant(random_tensor(4, 8, f.rng)), channels, &trace);
    for (std::size_t i = 0; i < 4; ++i) CHECK(trace.fusion_weights(i, 0) == doctest::Approx(1.0));
    CHECK_THROWS_AS(temporal_layer(vars, tape.constant(Tensor(4, 8)), {}), std::invalid_argument);
  }

  TEST_CASE("attention gradients match finite differences") {
    Fixture f;
    const Tensor q = random_tensor(4, 8, f.rng);
    const Tensor h1 = random_tensor(4, 8, f.rng), h2 = random_tensor(4, 8, f.rng);
    const Tensor w = random_tensor(4, 8, f.rng);
    auto loss = [&](bool grad) {
      tc::Tape tape;
      const auto vars = bind_temporal(tape, f.store);
      const std::vector<std::vector<Var>> ch = {{tape.constant(h1), tape.constant(h2)},
                                                {tape.constant(h2)}};
      const Var out = temporal_layer(vars, tape.constant(q), ch);
      const Var l = tc::sum(tc::mul(out, tape.constant(w)));
      if (grad) tape.backward(l);
      return l.value()[0];
    };
    f.store.zero_grad();
    loss(true);
    for (auto& p : f.store.all()) {
      if (p.name == "temporal.W_query_in") continue;  // not used by the layer itself
      const Tensor analytic = p.grad;
      const Tensor numeric = odflow::testing::numeric_gradient(p.value, [&] { return loss(false); });
      INFO(p.name);
      CHECK(odflow::testing::max_relative_error(analytic, numeric, 1e-4) < 1e-5);
    }
  }

  TEST_CASE("channel slots for day 10") {
    const SlotKey t{10, 9, 3};
    const auto same = channel_slots(t, {ChannelKind::SameHour, 6}, 24);
    for (int k = 0; k < 7; ++k) {
      CHECK(same[std::size_t(k)].day_index == 9 - k);
      CHECK(same[std::size_t(k)].slot == 9);
    }
    const auto recent = channel_slots(t, {ChannelKind::Recent, 6}, 24);
    REQUIRE(recent.size() == 6);
    for (int k = 0; k < 6; ++k) CHECK(recent[std::size_t(k)] == SlotKey{10, 3 + k, 3});
    // enumerate absolute indices for the wrap case
    const auto wrap = channel_slots({10, 3, 3}, {ChannelKind::Recent, 6}, 24);
    const long target = 10 * 24 + 2;
    for (int k = 0; k < 6; ++k) {
      const long a = target - 6 + k;
      CHECK(wrap[std::size_t(k)].day_index == a / 24);
      CHECK(wrap[std::size_t(k)].slot == a % 24 + 1);
    }
    CHECK(wrap.front() == SlotKey{9, 21, 2});
    CHECK(wrap.back() == SlotKey{10, 2, 3});
  }

  TEST_CASE("identical history rows give the value-projected row") {
    Fixture f;
    tc::Tape tape;
    const auto v = bind_temporal(tape, f.store);
    const Tensor row = random_tensor(1, 8, f.rng);
    Tensor hist(5, 8);
    for (std::size_t i = 0; i < 5; ++i)
      for (std::size_t k = 0; k < 8; ++k) hist(i, k) = row[k];
    const Var out = scaled_dot_attend(tape.constant(random_tensor(5, 8, f.rng)), tape.constant(hist),
                                      v.slot_attention);
    const Tensor expect = mm(row, f.store.at("temporal.slot.W_V").value);
    for (std::size_t i = 0; i < 5; ++i)
      for (std::size_t k = 0; k < 8; ++k) CHECK(out.value()(i, k) == doctest::Approx(expect[k]).epsilon(1e-12));
  }

  TEST_CASE("identity projections on two cells") {
    Fixture f;
    for (const char* m : {"temporal.slot.W_Q", "temporal.slot.W_K"}) {
      Tensor& w = f.store.at(m).value;
      for (std::size_t i = 0; i < 8; ++i)
        for (std::size_t j = 0; j < 8; ++j) w(i, j) = i == j ? 1.0 : 0.0;
    }
    tc::Tape tape;
    const auto v = bind_temporal(tape, f.store);
    const Tensor q = random_tensor(2, 8, f.rng), h = random_tensor(2, 8, f.rng);
    Tensor weights;
    scaled_dot_attend(tape.constant(q), tape.constant(h), v.slot_attention, &weights);
    for (std::size_t i = 0; i < 2; ++i) {
      double d[2];
      for (std::size_t j = 0; j < 2; ++j) {
        d[j] = 0.0;
        for (std::size_t k = 0; k < 8; ++k) d[j] += q(i, k) * h(j, k);
        d[j] /= std::sqrt(8.0);
      }
      const double w0 = std::exp(d[0]) / (std::exp(d[0]) + std::exp(d[1]));
      CHECK(weights(i, 0) == doctest::Approx(w0).epsilon(1e-12));
      CHECK(weights(i, 0) + weights(i, 1) == doctest::Approx(1.0).epsilon(1e-12));
    }
  }

  TEST_CASE("fusing identical channels returns their common projection") {
    Fixture f;
    tc::Tape tape;
    const auto v = bind_temporal(tape, f.store);
    const Var rep = tape.constant(random_tensor(4, 8, f.rng));
    const Var out = fuse_channels(v.fusion, tape.constant(random_tensor(4, 8, f.rng)), {rep, rep, rep, rep});
    const Tensor expect = mm(rep.value(), f.store.at("temporal.fusion.W_V").value);
    CHECK(max_abs_diff(out.value(), expect) < 1e-12);
  }

  TEST_CASE("channels stay isolated and sum their slots") {
    Fixture f;
    tc::Tape tape;
    const auto v = bind_temporal(tape, f.store);
    const Var query = tape.constant(random_tensor(4, v.w_query_in.value().rows(), f.rng));
    const Var same = tape.constant(random_tensor(4, 8, f.rng));
    const Var other = tape.constant(random_tensor(4, 8, f.rng));
    const Var changed = tape.constant(random_tensor(4, 8, f.rng));
    const Var q = tc::matmul(query, v.w_query_in);
    // same-hour over seven identical slots against a one-slot recent channel
    TemporalTrace t1, t2;
    temporal_layer(v, q, {std::vector<Var>(7, same), {same}, {other}}, &t1);
    temporal_layer(v, q, {std::vector<Var>(7, same), {same}, {changed}}, &t2);
    CHECK(max_abs_diff(t1.channel_representations[0], [&] {
            Tensor x = t1.channel_representations[1];
            for (double& y : x.values()) y *= 7.0;
            return x;
          }()) < 1e-12);
    // changing the third channel's history leaves the others untouched
    CHECK(max_abs_diff(t1.channel_representations[0], t2.channel_representations[0]) == 0.0);
    CHECK(max_abs_diff(t1.channel_representations[1], t2.channel_representations[1]) == 0.0);
    CHECK(max_abs_diff(t1.channel_representations[2], t2.channel_representations[2]) > 0.0);
  }
}
