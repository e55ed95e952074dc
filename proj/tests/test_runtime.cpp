#include <gtest/gtest.h>

#include <atomic>
#include <random>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "kdg/runtime.hpp"

using namespace kdg;
using namespace kdg::rt;

namespace {

bool has_pred(const TaskGraphRun& r, int task, int pred) {
  const auto& p = r.predecessors[task];
  return std::find(p.begin(), p.end(), pred) != p.end();
}

}  // namespace

TEST(Runtime, ReadAfterWriteAndWriteAfterRead) {
  Runtime rt;
  const auto a = rt.register_data("a");
  int x = 0, y1 = 0, y2 = 0;
  rt.submit({"w", [&] { x = 7; }, {{a, Access::write}}});
  rt.submit({"r1", [&] { y1 = x; }, {{a, Access::read}}});
  rt.submit({"r2", [&] { y2 = x; }, {{a, Access::read}}});
  rt.submit({"rw", [&] { x += 1; }, {{a, Access::read_write}}});
  const auto r = rt.run(4);
  EXPECT_EQ(y1, 7);
  EXPECT_EQ(y2, 7);
  EXPECT_EQ(x, 8);
  EXPECT_TRUE(has_pred(r, 1, 0));
  EXPECT_TRUE(has_pred(r, 2, 0));
  EXPECT_FALSE(has_pred(r, 2, 1));  // readers are unordered
  EXPECT_TRUE(has_pred(r, 3, 1));
  EXPECT_TRUE(has_pred(r, 3, 2));
  EXPECT_EQ(rt.pending(), 0u);
}

TEST(Runtime, CommuteEpochIsUnorderedButExclusive) {
  Runtime rt;
  const auto acc = rt.register_data("acc");
  std::atomic<int> inside{0};
  std::atomic<bool> overlap{false};
  long sum = 0;
  rt.submit({"zero", [&] { sum = 0; }, {{acc, Access::write}}});
  for (int i = 1; i <= 50; ++i)
    rt.submit({"add", [&, i] {
                 if (inside.fetch_add(1) != 0) overlap = true;
                 std::this_thread::yield();
                 sum += i;
                 inside.fetch_sub(1);
               },
               {{acc, Access::commute}}});
  long seen = -1;
  rt.submit({"read", [&] { seen = sum; }, {{acc, Access::read}}});
  const auto r = rt.run(4);
  EXPECT_FALSE(overlap.load());
  EXPECT_EQ(seen, 1275);
  for (int t = 2; t <= 50; ++t) EXPECT_FALSE(has_pred(r, t, 1));
  EXPECT_EQ(r.predecessors[51].size(), 50u);
}

TEST(Runtime, DeterministicModeSerializesCommute) {
  Runtime rt;
  rt.deterministic_mode(true);
  const auto acc = rt.register_data("acc");
  std::vector<int> order;
  for (int i = 0; i < 10; ++i)
    rt.submit({"add", [&, i] { order.push_back(i); }, {{acc, Access::commute}}});
  const auto r = rt.run(4);
  for (int t = 1; t < 10; ++t) EXPECT_TRUE(has_pred(r, t, t - 1));
  std::vector<int> want(10);
  std::iota(want.begin(), want.end(), 0);
  EXPECT_EQ(order, want);
}

TEST(Runtime, HandleErrors) {
  Runtime rt;
  const auto a = rt.register_data("a");
  EXPECT_THROW(rt.submit({"dup", {}, {{a, Access::read}, {a, Access::write}}}),
               DuplicateHandleInTask);
  EXPECT_THROW(rt.submit({"bad", {}, {{DataHandle{5}, Access::read}}}), UnknownHandle);
  EXPECT_EQ(rt.pending(), 0u);
  EXPECT_EQ(rt.handle_name(a), "a");
}

TEST(Runtime, ForeignExceptionBecomesCodeletPanicked) {
  Runtime rt;
  const auto a = rt.register_data("a");
  rt.submit({"boom", [] { throw std::runtime_error("x"); }, {{a, Access::write}}});
  rt.submit({"after", [] {}, {{a, Access::read}}});
  try {
    rt.run(2);
    FAIL();
  } catch (const CodeletPanicked& e) {
    EXPECT_NE(std::string(e.what()).find("boom"), std::string::npos);
  }
  // library errors keep their type
  rt.submit({"num", [] { throw NonpositiveDensity("rho = -1"); }, {{a, Access::write}}});
  EXPECT_THROW(rt.run(1), NonpositiveDensity);
  EXPECT_EQ(rt.pending(), 0u);
}

TEST(Runtime, UndeclaredAccessGuard) {
  Runtime rt;
  const auto a = rt.register_data("a");
  const auto b = rt.register_data("b");
  rt.submit({"ok", [&] { Runtime::check_access(a, true); Runtime::check_access(b, false); },
             {{a, Access::read_write}, {b, Access::read}}});
  EXPECT_NO_THROW(rt.run(1));
  rt.submit({"bad", [&] { Runtime::check_access(b, true); }, {{b, Access::read}}});
  EXPECT_THROW(rt.run(1), UndeclaredAccess);
}

// Random programs over a few integer cells. Each task applies an affine
// update; the result must match the sequential execution for any worker
// count, and every derived edge must be respected in the trace.
TEST(Runtime, RandomProgramsMatchSequential) {
  std::mt19937 rng(123);
  for (int trial = 0; trial < 40; ++trial) {
    const int nh = 1 + static_cast<int>(rng() % 4);
    const int nt = 5 + static_cast<int>(rng() % 40);
    struct Op { int dst, src; long mul, add; bool commute; };
    std::vector<Op> ops(nt);
    for (auto& op : ops) {
      op.dst = static_cast<int>(rng() % nh);
      op.src = static_cast<int>(rng() % nh);
      op.mul = 1 + static_cast<long>(rng() % 3);
      op.add = static_cast<long>(rng() % 7);
      op.commute = rng() % 3 == 0;
    }
    auto sequential = [&] {
      std::vector<long> v(nh, 1);
      for (const auto& op : ops) {
        if (op.commute) v[op.dst] += op.add;
        else v[op.dst] = v[op.src] * op.mul + op.add;
      }
      return v;
    };
    for (int workers : {1, 3}) {
      Runtime rt;
      std::vector<DataHandle> h;
      for (int i = 0; i < nh; ++i) h.push_back(rt.register_data("h"));
      std::vector<long> v(nh, 1);
      for (const auto& op : ops) {
        TaskDecl d;
        d.name = "op";
        if (op.commute) {
          d.codelet = [&v, op] { v[op.dst] += op.add; };
          d.accesses = {{h[op.dst], Access::commute}};
        } else {
          d.codelet = [&v, op] { v[op.dst] = v[op.src] * op.mul + op.add; };
          if (op.src == op.dst) d.accesses = {{h[op.dst], Access::read_write}};
          else d.accesses = {{h[op.src], Access::read}, {h[op.dst], Access::write}};
        }
        rt.submit(std::move(d));
      }
      const auto r = rt.run(workers, trial % 2 ? Scheduler::priority : Scheduler::eager);
      EXPECT_EQ(v, sequential()) << "trial " << trial << " workers " << workers;
      for (int t = 0; t < nt; ++t)
        for (int p : r.predecessors[t]) EXPECT_LT(r.trace[p].seq_end, r.trace[t].seq_start);
    }
  }
}

// Two independent chains sharing no data may overlap in time when more than
// one worker runs; with one worker all tasks are sequential.
TEST(Runtime, IndependentChainsHaveNoEdges) {
  Runtime rt;
  const auto a = rt.register_data("a");
  const auto b = rt.register_data("b");
  for (int i = 0; i < 3; ++i) {
    rt.submit({"a", [] {}, {{a, Access::read_write}}});
    rt.submit({"b", [] {}, {{b, Access::read_write}}});
  }
  const auto r = rt.run(1);
  for (int t = 0; t < 6; ++t)
    for (int p : r.predecessors[t]) EXPECT_EQ(p % 2, t % 2);
  for (int t = 1; t < 6; ++t) EXPECT_GT(r.trace[t].seq_start, r.trace[t - 1].seq_end);
}

TEST(Runtime, PrioritySchedulerRunsCriticalPathFirst) {
  Runtime rt;
  const auto a = rt.register_data("a");
  const auto b = rt.register_data("b");
  std::vector<int> order;
  rt.submit({"short", [&] { order.push_back(0); }, {{b, Access::read_write}}});
  rt.submit({"long0", [&] { order.push_back(1); }, {{a, Access::read_write}}});
  rt.submit({"long1", [&] { order.push_back(2); }, {{a, Access::read_write}}});
  rt.run(1, Scheduler::priority);
  EXPECT_EQ(order, (std::vector<int>{1, 0, 2}));
  EXPECT_THROW(parse_scheduler("fifo"), ConfigError);
  EXPECT_EQ(parse_scheduler("priority"), Scheduler::priority);
}

TEST(Runtime, TraceCsv) {
  Runtime rt;
  const auto a = rt.register_data("a");
  rt.submit({"t0", [] {}, {{a, Access::write}}});
  rt.submit({"t1", [] {}, {{a, Access::read}}});
  const auto r = rt.run(1);
  std::ostringstream os;
  write_trace_csv(os, r);
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  EXPECT_EQ(line, "task_id,name,worker,t_start,t_end");
  int rows = 0;
  while (std::getline(is, line)) ++rows;
  EXPECT_EQ(rows, 2);
  EXPECT_LE(r.trace[0].t_end, r.trace[1].t_start);
  EXPECT_STREQ(to_string(Access::commute), "COMMUTE");
}
