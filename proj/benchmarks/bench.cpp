#include <benchmark/benchmark.h>

#include "qkdnet/auth.hpp"
#include "qkdnet/key_store.hpp"
#include "qkdnet/planner.hpp"
#include "qkdnet/random.hpp"
#include "qkdnet/routing.hpp"
#include "qkdnet/sim.hpp"
#include "qkdnet/topology.hpp"

using namespace qkdnet;

static void BM_KeyStoreReserve(benchmark::State& state) {
  const auto n = static_cast<std::uint64_t>(state.range(0));
  Rng r(1);
  const Bytes init = r.bytes(64u << 20);
  for (auto _ : state) {
    state.PauseTiming();
    KeyStore store("L", init);
    state.ResumeTiming();
    while (store.can_reserve(n, KeyPurpose::Encrypt)) {
      Reservation res = store.reserve(n, KeyPurpose::Encrypt);
      benchmark::DoNotOptimize(res.take().data());
    }
  }
  state.SetBytesProcessed(static_cast<std::int64_t>(state.iterations()) * (64 << 20));
}
BENCHMARK(BM_KeyStoreReserve)->Arg(64)->Arg(1056)->Unit(benchmark::kMillisecond);

static void BM_PolyTag(benchmark::State& state) {
  Rng r(2);
  const Bytes key = r.bytes(kAuthKeyBytes);
  const Bytes msg = r.bytes(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(poly_tag(key, msg));
  state.SetBytesProcessed(static_cast<std::int64_t>(state.iterations()) * state.range(0));
}
BENCHMARK(BM_PolyTag)->Arg(64)->Arg(1042);

static void BM_ShortestPathVienna(benchmark::State& state) {
  const Topology t = vienna_preset();
  LinkStateDB db;
  for (const auto& [id, l] : t.links()) {
    db.install({id, l.a, 1, true, 30000, 1000, 0});
    db.install({id, l.b, 1, true, 30000, 1000, 0});
  }
  for (auto _ : state) benchmark::DoNotOptimize(shortest_path(t, db, "Alice", "Bob"));
}
BENCHMARK(BM_ShortestPathVienna);

static void BM_DisjointPathsBlock(benchmark::State& state) {
  const Topology t = building_block_preset();
  LinkStateDB db;
  for (const auto& [id, l] : t.links()) {
    db.install({id, l.a, 1, true, 30000, 1000, 0});
    db.install({id, l.b, 1, true, 30000, 1000, 0});
  }
  for (auto _ : state) benchmark::DoNotOptimize(disjoint_paths(t, db, "Alice", "Bob", 3));
}
BENCHMARK(BM_DisjointPathsBlock);

static void BM_BaselineScenario(benchmark::State& state) {
  const Topology t = vienna_preset();
  const Scenario sc = builtin_scenario("baseline", t);
  for (auto _ : state) benchmark::DoNotOptimize(run(t, sc, 42).hops.size());
}
BENCHMARK(BM_BaselineScenario)->Unit(benchmark::kMillisecond);

static void BM_PlannerScan(benchmark::State& state) {
  PlannerParams p;
  for (auto _ : state) benchmark::DoNotOptimize(optimal_link_length(p, true));
}
BENCHMARK(BM_PlannerScan)->Unit(benchmark::kMicrosecond);

BENCHMARK_MAIN();
