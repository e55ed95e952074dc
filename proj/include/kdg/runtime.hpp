#pragma once

// In-process data-dependency task runtime. Tasks are submitted sequentially
// with declared accesses to registered data handles; dependencies are
// derived at submission time from the access history of every handle:
//
//   - consecutive Read accesses form one epoch, unordered among themselves;
//   - consecutive Commute accesses form one epoch, unordered among
//     themselves but mutually exclusive while running;
//   - Write / ReadWrite always open a new single-task epoch.
//
// A task depends on every task of the previous epoch of each handle it
// touches. run() executes the pending tasks on a pool of worker threads.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <exception>
#include <functional>
#include <limits>
#include <mutex>
#include <ostream>
#include <set>
#include <string>
#include <thread>
#include <tuple>
#include <unordered_set>
#include <vector>

#include "kdg/errors.hpp"

namespace kdg::rt {

enum class Access { read, write, read_write, commute };

inline const char* to_string(Access a) {
  switch (a) {
    case Access::read: return "R";
    case Access::write: return "W";
    case Access::read_write: return "RW";
    case Access::commute: return "COMMUTE";
  }
  return "?";
}

enum class Scheduler { eager, priority };

struct DataHandle {
  int id = -1;
  friend bool operator==(DataHandle a, DataHandle b) { return a.id == b.id; }
  friend bool operator<(DataHandle a, DataHandle b) { return a.id < b.id; }
};

struct TaskDecl {
  std::string name;
  std::function<void()> codelet;
  std::vector<std::pair<DataHandle, Access>> accesses;
  /// Optional hint; the priority scheduler orders by critical path first and
  /// by this value second.
  int priority = 0;
};

struct TraceEntry {
  int task = 0;
  std::string name;
  int worker = 0;
  double t_start = 0.0;  // seconds since run start
  double t_end = 0.0;
  std::uint64_t seq_start = 0;  // global event counter, strictly ordered
  std::uint64_t seq_end = 0;
};

struct TaskGraphRun {
  std::vector<TaskDecl> tasks;                    // submission order (codelets dropped)
  std::vector<std::vector<int>> predecessors;     // derived happens-before edges
  std::vector<TraceEntry> trace;                  // indexed by task id
  double wall_seconds = 0.0;
};

inline void write_trace_csv(std::ostream& os, const TaskGraphRun& r) {
  os << "task_id,name,worker,t_start,t_end\n";
  for (const auto& e : r.trace)
    os << e.task << "," << e.name << "," << e.worker << "," << e.t_start << "," << e.t_end
       << "\n";
}

class Runtime {
public:
  Runtime() = default;
  Runtime(const Runtime&) = delete;
  Runtime& operator=(const Runtime&) = delete;

  DataHandle register_data(std::string name) {
    handle_names_.push_back(std::move(name));
    states_.emplace_back();
    return {static_cast<int>(handle_names_.size()) - 1};
  }

  const std::string& handle_name(DataHandle h) const { return handle_names_.at(h.id); }
  int num_handles() const { return static_cast<int>(handle_names_.size()); }

  /// In deterministic mode Commute is treated as ReadWrite: commutative
  /// updates are serialized in submission order.
  void deterministic_mode(bool on) { deterministic_ = on; }
  bool deterministic() const { return deterministic_; }

  std::size_t pending() const { return tasks_.size(); }

  int submit(TaskDecl decl) {
    std::set<int> seen;
    for (const auto& [h, mode] : decl.accesses) {
      if (h.id < 0 || h.id >= num_handles())
        throw UnknownHandle("task '" + decl.name + "' uses handle " + std::to_string(h.id));
      if (!seen.insert(h.id).second)
        throw DuplicateHandleInTask("task '" + decl.name + "' lists handle '" +
                                    handle_name(h) + "' twice");
    }
    const int id = static_cast<int>(tasks_.size());
    std::set<int> deps;
    for (auto& [h, mode] : decl.accesses) {
      if (deterministic_ && mode == Access::commute) mode = Access::read_write;
      auto& st = states_[h.id];
      const Epoch kind = mode == Access::read      ? Epoch::readers
                         : mode == Access::commute ? Epoch::commuters
                                                   : Epoch::exclusive;
      const bool joins = kind != Epoch::exclusive && st.current_kind == kind &&
                         !st.current.empty();
      if (joins) {
        deps.insert(st.previous.begin(), st.previous.end());
        st.current.push_back(id);
      } else {
        deps.insert(st.current.begin(), st.current.end());
        st.previous = std::move(st.current);
        st.current = {id};
        st.current_kind = kind;
      }
    }
    deps.erase(id);
    tasks_.push_back(std::move(decl));
    preds_.emplace_back(deps.begin(), deps.end());
    return id;
  }

  /// Executes every pending task and clears the submission state.
  TaskGraphRun run(int workers = default_workers(), Scheduler sched = Scheduler::eager) {
    if (workers < 1) workers = 1;
    const int n = static_cast<int>(tasks_.size());
    TaskGraphRun out;
    out.trace.resize(n);

    std::vector<std::vector<int>> succ(n);
    std::vector<int> missing(n, 0);
    for (int t = 0; t < n; ++t) {
      missing[t] = static_cast<int>(preds_[t].size());
      for (int p : preds_[t]) succ[p].push_back(t);
    }

    // Critical-path length to a sink, used by the priority scheduler.
    std::vector<int> bottom(n, 0);
    for (int t = n - 1; t >= 0; --t)
      for (int s : succ[t]) bottom[t] = std::max(bottom[t], bottom[s] + 1);

    std::vector<std::vector<int>> commute_handles(n);
    for (int t = 0; t < n; ++t)
      for (const auto& [h, mode] : tasks_[t].accesses)
        if (mode == Access::commute) commute_handles[t].push_back(h.id);

    auto key = [&](int t) {
      if (sched == Scheduler::priority)
        return std::make_tuple(-bottom[t], -tasks_[t].priority, t);
      return std::make_tuple(0, 0, t);
    };
    auto cmp = [&](int a, int b) { return key(a) < key(b); };
    std::set<int, decltype(cmp)> ready(cmp);
    for (int t = 0; t < n; ++t)
      if (missing[t] == 0) ready.insert(t);

    std::mutex mu;
    std::condition_variable cv;
    std::vector<char> held(num_handles(), 0);
    int done = 0, running = 0;
    bool failed = false, deadlock = false;
    std::exception_ptr error;
    int failed_task = -1;
    std::atomic<std::uint64_t> seq{0};
    const auto t0 = std::chrono::steady_clock::now();
    auto now = [&] {
      return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    };

    auto worker_loop = [&](int wid) {
      std::unique_lock lock(mu);
      for (;;) {
        if (failed || deadlock || done == n) break;
        int pick = -1;
        for (int t : ready) {
          bool free = true;
          for (int h : commute_handles[t])
            if (held[h]) { free = false; break; }
          if (free) { pick = t; break; }
        }
        if (pick < 0) {
          if (running == 0 && ready.empty() && done < n) {
            deadlock = true;
            cv.notify_all();
            break;
          }
          cv.wait(lock);
          continue;
        }
        ready.erase(pick);
        for (int h : commute_handles[pick]) held[h] = 1;
        ++running;
        lock.unlock();

        auto& e = out.trace[pick];
        e.task = pick;
        e.name = tasks_[pick].name;
        e.worker = wid;
        e.seq_start = seq.fetch_add(1);
        e.t_start = now();
        current_task_ = &tasks_[pick];
        try {
          if (tasks_[pick].codelet) tasks_[pick].codelet();
        } catch (...) {
          std::lock_guard g(mu);
          if (!failed) {
            failed = true;
            error = std::current_exception();
            failed_task = pick;
          }
        }
        current_task_ = nullptr;
        e.t_end = now();
        e.seq_end = seq.fetch_add(1);

        lock.lock();
        --running;
        ++done;
        for (int h : commute_handles[pick]) held[h] = 0;
        for (int s : succ[pick])
          if (--missing[s] == 0) ready.insert(s);
        cv.notify_all();
      }
    };

    if (workers == 1) {
      worker_loop(0);
    } else {
      std::vector<std::thread> pool;
      pool.reserve(workers);
      for (int w = 0; w < workers; ++w) pool.emplace_back(worker_loop, w);
      for (auto& th : pool) th.join();
    }
    out.wall_seconds = now();

    out.predecessors = std::move(preds_);
    out.tasks = std::move(tasks_);
    for (auto& t : out.tasks) t.codelet = nullptr;
    tasks_.clear();
    preds_.clear();
    for (auto& s : states_) s = HandleState{};

    if (failed) {
      std::string what = "task " + std::to_string(failed_task) + " ('" +
                         out.tasks[failed_task].name + "')";
      try {
        std::rethrow_exception(error);
      } catch (const Error&) {
        // Library errors keep their type; the task id is in the trace.
        throw;
      } catch (const std::exception& e) {
        throw CodeletPanicked(what + ": " + e.what());
      } catch (...) {
        throw CodeletPanicked(what + ": unknown exception");
      }
    }
    if (deadlock) throw DeadlockDetected("no runnable task while tasks remain");
    return out;
  }

  /// Debug guard for task bodies: checks the running task declared h with a
  /// mode that permits the requested access. Compiled out under NDEBUG.
  static void check_access([[maybe_unused]] DataHandle h, [[maybe_unused]] bool write) {
#ifndef NDEBUG
    const TaskDecl* t = current_task_;
    if (!t) return;
    for (const auto& [dh, mode] : t->accesses)
      if (dh == h && (!write || mode != Access::read)) return;
    throw UndeclaredAccess("task '" + t->name + "' touches handle " + std::to_string(h.id) +
                           (write ? " for writing" : " for reading"));
#endif
  }

  static int default_workers() {
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
  }

private:
  enum class Epoch { none, readers, commuters, exclusive };
  struct HandleState {
    Epoch current_kind = Epoch::none;
    std::vector<int> current;
    std::vector<int> previous;
  };

  std::vector<std::string> handle_names_;
  std::vector<HandleState> states_;
  std::vector<TaskDecl> tasks_;
  std::vector<std::vector<int>> preds_;
  bool deterministic_ = false;
  static inline thread_local const TaskDecl* current_task_ = nullptr;
};

inline Scheduler parse_scheduler(const std::string& s) {
  if (s == "eager") return Scheduler::eager;
  if (s == "priority") return Scheduler::priority;
  throw ConfigError("unknown scheduler '" + s + "'");
}

}  // namespace kdg::rt
