#include "stencilpipe/simulator.hpp"

#include <algorithm>
#include <deque>
#include <map>
#include <memory>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "stencilpipe/evaluate.hpp"

namespace stencilpipe {

namespace {

struct Packet {
  std::vector<Scalar> values;
  std::vector<std::uint8_t> valid;
  std::int64_t arrival = 0;  // first cycle the consumer may pop it
};

struct ChannelState {
  std::int64_t capacity_vec = 1;
  std::deque<Packet> queue;  // includes elements still in flight on remote links
  std::int64_t latency = 0;
  double bandwidth = 1e30;   // elements/cycle across all links
  double credit = 0.0;
  ChannelStats stats;

  bool can_push(std::int64_t w) const {
    return static_cast<std::int64_t>(queue.size()) < capacity_vec &&
           credit + 1e-9 >= static_cast<double>(w);
  }
  void push(Packet p, std::int64_t cycle, std::int64_t w) {
    p.arrival = cycle + 1 + latency;
    queue.push_back(std::move(p));
    credit -= static_cast<double>(w);
    stats.pushed += w;
  }
  bool can_pop(std::int64_t cycle) const {
    return !queue.empty() && queue.front().arrival <= cycle;
  }
  Packet pop(std::int64_t w) {
    Packet p = std::move(queue.front());
    queue.pop_front();
    stats.popped += w;
    return p;
  }
};

// Sliding window over one field's expanded stream, keyed by element index.
struct Window {
  std::int64_t base = 0;  // expanded index of entries.front()
  std::deque<std::pair<Scalar, std::uint8_t>> entries;

  void append(const Packet& p) {
    for (std::size_t i = 0; i < p.values.size(); ++i) {
      entries.emplace_back(p.values[i], p.valid[i]);
    }
  }
  void prune_below(std::int64_t index) {
    while (!entries.empty() && base < index) {
      entries.pop_front();
      ++base;
    }
  }
  EvalResult at(std::int64_t index) const {
    std::int64_t rel = index - base;
    if (rel < 0 || rel >= static_cast<std::int64_t>(entries.size())) {
      throw ExecutionError("internal: stencil window miss (analysis/simulator mismatch)");
    }
    const auto& e = entries[static_cast<std::size_t>(rel)];
    return {e.first, e.second != 0};
  }
};

struct UnitState {
  const NodeAnalysis* analysis = nullptr;
  std::unique_ptr<CellEvaluator> eval;
  std::int64_t step = 0;
  std::int64_t init = 0;
  std::int64_t total_steps = 0;
  std::int64_t latency = 0;
  std::map<std::string, Window> windows;
  std::map<std::string, int> in_channel;  // field -> channel index
  std::deque<std::pair<Packet, std::int64_t>> pipe;  // (packet, ready cycle)

  bool done() const { return step >= total_steps && pipe.empty(); }
};

struct ReaderState {
  std::int64_t next_vec = 0;
  const FieldArray* array = nullptr;
  std::vector<int> dim_idx;
  std::vector<std::int64_t> own_strides;
  bool full_rank = false;
};

struct WriterState {
  std::int64_t received = 0;
  FieldArray out;
};

}  // namespace

SimulationResult simulate(const DataflowGraph& graph, const BufferReport& report,
                          const FieldMap& inputs, const SimOptions& options) {
  const StencilProgram& program = graph.program;
  const std::int64_t w = program.vectorization;
  const std::int64_t n_vectors = program.iterations();
  const Shape& shape = program.shape;

  SimulationResult result;
  result.channels.assign(graph.channels.size(), ChannelStats{});

  // --- set up channel state ---
  std::vector<ChannelState> channels(graph.channels.size());
  for (std::size_t c = 0; c < channels.size(); ++c) {
    const Channel& ch = graph.channels[c];
    channels[c].capacity_vec = std::max<std::int64_t>(1, (ch.depth + w - 1) / w);
    if (ch.remote) {
      channels[c].latency = ch.remote->latency;
      channels[c].bandwidth = ch.remote->effective_bandwidth();
      channels[c].credit = channels[c].bandwidth;
    } else {
      channels[c].credit = static_cast<double>(w);  // local links never throttle
    }
  }

  // --- set up node state ---
  std::vector<ReaderState> readers(graph.nodes.size());
  std::vector<UnitState> units(graph.nodes.size());
  std::vector<WriterState> writers(graph.nodes.size());
  std::vector<std::vector<int>> outs(graph.nodes.size()), ins(graph.nodes.size());
  for (std::size_t c = 0; c < graph.channels.size(); ++c) {
    outs[static_cast<std::size_t>(graph.channels[c].producer)].push_back(static_cast<int>(c));
    ins[static_cast<std::size_t>(graph.channels[c].consumer)].push_back(static_cast<int>(c));
  }

  for (std::size_t i = 0; i < graph.nodes.size(); ++i) {
    const DataflowNode& n = graph.nodes[i];
    switch (n.kind) {
      case NodeKind::MemoryReader: {
        auto it = inputs.find(n.field);
        if (it == inputs.end()) throw ExecutionError("missing input \"" + n.field + "\"");
        if (it->second.shape != program.field_shape(n.field)) {
          throw ExecutionError("input \"" + n.field + "\" has the wrong shape");
        }
        if (it->second.dtype != program.field_dtype(n.field)) {
          throw ExecutionError("input \"" + n.field + "\" has the wrong dtype");
        }
        readers[i].array = &it->second;
        readers[i].dim_idx = program.field_dim_indices(n.field);
        readers[i].own_strides = strides_of(it->second.shape);
        readers[i].full_rank = it->second.shape == shape;
        break;
      }
      case NodeKind::StencilUnit: {
        UnitState& u = units[i];
        u.analysis = &report.nodes.at(n.id);
        u.eval = std::make_unique<CellEvaluator>(program, graph.stencil_of(static_cast<int>(i)));
        u.init = u.analysis->init_iterations;
        u.latency = u.analysis->latency;
        u.total_steps = n_vectors + u.init;
        for (const auto& [field, buf] : u.analysis->buffers) {
          (void)buf;
          u.windows[field] = Window{};
        }
        for (int c : ins[i]) u.in_channel[graph.channels[static_cast<std::size_t>(c)].field] = c;
        break;
      }
      case NodeKind::MemoryWriter: {
        writers[i].out = FieldArray::make(n.field, program.field_dtype(n.field), shape);
        break;
      }
    }
  }

  std::vector<int> order = topological_order(graph);
  std::vector<int> reverse_order(order.rbegin(), order.rend());

  std::ofstream trace;
  if (!options.trace_path.empty()) {
    trace.open(options.trace_path);
    trace << "cycle";
    for (const auto& ch : graph.channels) {
      trace << "," << graph.nodes[static_cast<std::size_t>(ch.producer)].id << "->"
            << graph.nodes[static_cast<std::size_t>(ch.consumer)].id;
    }
    trace << "\n";
  }

  std::int64_t limit = options.limit;
  if (limit < 0) {
    // Generous default: the ideal pipeline plus all analyzed slack, tripled.
    std::int64_t slack = 0;
    for (const auto& ca : report.channels) slack += ca.depth / std::max<std::int64_t>(1, w) + 1;
    for (const auto& [id, na] : report.nodes) {
      (void)id;
      slack += na.init_iterations + na.latency + 1;
    }
    for (const auto& ch : graph.channels) {
      if (ch.remote) slack += ch.remote->latency;
    }
    limit = 3 * (n_vectors + slack) + 1000;
  }

  auto writers_done = [&]() {
    for (std::size_t i = 0; i < graph.nodes.size(); ++i) {
      if (graph.nodes[i].kind == NodeKind::MemoryWriter && writers[i].received < n_vectors) {
        return false;
      }
    }
    return true;
  };

  std::int64_t pos_buf[3] = {0, 0, 0};
  std::int64_t cycle = 0;
  for (;; ++cycle) {
    if (cycle > limit) {
      result.outcome = SimOutcome::LimitExceeded;
      break;
    }
    bool progress = false;

    // Refill remote bandwidth credits at cycle start.
    for (auto& ch : channels) {
      double cap = std::max(static_cast<double>(w), ch.bandwidth);
      ch.credit = std::min(ch.credit + ch.bandwidth, cap);
    }

    // Consumers run before producers so a pop frees space for a same-cycle
    // push (the push itself still lands next cycle).
    for (int ni : reverse_order) {
      const DataflowNode& node = graph.nodes[static_cast<std::size_t>(ni)];
      switch (node.kind) {
        case NodeKind::MemoryWriter: {
          WriterState& ws = writers[static_cast<std::size_t>(ni)];
          if (ws.received >= n_vectors) break;
          int c = ins[static_cast<std::size_t>(ni)][0];
          ChannelState& ch = channels[static_cast<std::size_t>(c)];
          if (!ch.can_pop(cycle)) {
            ch.stats.pop_stalls++;
            break;
          }
          Packet p = ch.pop(w);
          std::int64_t base = ws.received * w;
          for (std::int64_t lane = 0; lane < w; ++lane) {
            ws.out.values[static_cast<std::size_t>(base + lane)] = p.values[static_cast<std::size_t>(lane)];
            ws.out.valid[static_cast<std::size_t>(base + lane)] = p.valid[static_cast<std::size_t>(lane)];
          }
          ws.received++;
          progress = true;
          break;
        }

        case NodeKind::StencilUnit: {
          UnitState& u = units[static_cast<std::size_t>(ni)];

          // Drain the latency pipe first; a stalled exit stalls the unit.
          bool exit_stalled = false;
          if (!u.pipe.empty() && u.pipe.front().second <= cycle) {
            bool space = true;
            for (int c : outs[static_cast<std::size_t>(ni)]) {
              if (!channels[static_cast<std::size_t>(c)].can_push(w)) {
                channels[static_cast<std::size_t>(c)].stats.push_stalls++;
                space = false;
              }
            }
            if (space) {
              for (int c : outs[static_cast<std::size_t>(ni)]) {
                channels[static_cast<std::size_t>(c)].push(u.pipe.front().first, cycle, w);
              }
              u.pipe.pop_front();
              progress = true;
            } else {
              exit_stalled = true;
            }
          }

          if (exit_stalled || u.step >= u.total_steps) break;

          bool consuming = u.step < n_vectors;
          bool emitting = u.step >= u.init;

          bool can_fire = true;
          if (consuming) {
            for (const auto& [field, c] : u.in_channel) {
              (void)field;
              if (!channels[static_cast<std::size_t>(c)].can_pop(cycle)) {
                channels[static_cast<std::size_t>(c)].stats.pop_stalls++;
                can_fire = false;
              }
            }
          }
          // Zero-latency units push in the firing cycle, so the step commits
          // only if the output channels have space now.
          if (can_fire && emitting && u.latency == 0) {
            for (int c : outs[static_cast<std::size_t>(ni)]) {
              if (!channels[static_cast<std::size_t>(c)].can_push(w)) {
                channels[static_cast<std::size_t>(c)].stats.push_stalls++;
                can_fire = false;
              }
            }
          }
          if (!can_fire) break;

          if (consuming) {
            for (const auto& [field, c] : u.in_channel) {
              Packet p = channels[static_cast<std::size_t>(c)].pop(w);
              u.windows[field].append(p);
            }
          }
          if (emitting) {
            std::int64_t e = u.step - u.init;
            std::int64_t cell_base = e * w;
            // Entries below the lowest reachable tap are dead.
            for (auto& [field, win] : u.windows) {
              win.prune_below(cell_base + u.analysis->buffers.at(field).span_lo);
            }
            Packet out;
            out.values.resize(static_cast<std::size_t>(w));
            out.valid.resize(static_cast<std::size_t>(w));
            for (std::int64_t lane = 0; lane < w; ++lane) {
              std::int64_t flat = cell_base + lane;
              unflatten(flat, shape, pos_buf);
              auto fetch = [&](const CellEvaluator::AccessPlan& plan, std::int64_t,
                               std::int64_t rel) -> EvalResult {
                return u.windows.at(plan.field).at(flat + rel);
              };
              EvalResult r = u.eval->evaluate(pos_buf, fetch);
              out.values[static_cast<std::size_t>(lane)] = r.value;
              out.valid[static_cast<std::size_t>(lane)] = r.valid ? 1 : 0;
            }
            if (u.latency == 0) {
              for (int c : outs[static_cast<std::size_t>(ni)]) {
                channels[static_cast<std::size_t>(c)].push(out, cycle, w);
              }
            } else {
              u.pipe.emplace_back(std::move(out), cycle + u.latency);
            }
          }
          u.step++;
          progress = true;
          break;
        }

        case NodeKind::MemoryReader: {
          ReaderState& rs = readers[static_cast<std::size_t>(ni)];
          if (rs.next_vec >= n_vectors) break;
          bool space = true;
          for (int c : outs[static_cast<std::size_t>(ni)]) {
            if (!channels[static_cast<std::size_t>(c)].can_push(w)) {
              channels[static_cast<std::size_t>(c)].stats.push_stalls++;
              space = false;
            }
          }
          if (!space) break;
          Packet p;
          p.values.resize(static_cast<std::size_t>(w));
          p.valid.resize(static_cast<std::size_t>(w));
          std::int64_t base = rs.next_vec * w;
          for (std::int64_t lane = 0; lane < w; ++lane) {
            std::int64_t own;
            if (rs.full_rank) {
              own = base + lane;
            } else {
              unflatten(base + lane, shape, pos_buf);
              own = 0;
              for (std::size_t d = 0; d < rs.dim_idx.size(); ++d) {
                own += pos_buf[rs.dim_idx[d]] * rs.own_strides[d];
              }
            }
            p.values[static_cast<std::size_t>(lane)] = rs.array->values[static_cast<std::size_t>(own)];
            p.valid[static_cast<std::size_t>(lane)] = rs.array->valid[static_cast<std::size_t>(own)];
          }
          for (int c : outs[static_cast<std::size_t>(ni)]) {
            channels[static_cast<std::size_t>(c)].push(p, cycle, w);
          }
          rs.next_vec++;
          progress = true;
          break;
        }
      }
    }

    for (std::size_t c = 0; c < channels.size(); ++c) {
      std::int64_t occ = static_cast<std::int64_t>(channels[c].queue.size()) * w;
      channels[c].stats.max_occupancy = std::max(channels[c].stats.max_occupancy, occ);
    }
    if (trace.is_open()) {
      trace << cycle;
      for (const auto& ch : channels) trace << "," << ch.queue.size() * w;
      trace << "\n";
    }

    if (writers_done()) {
      result.outcome = SimOutcome::Completed;
      result.total_cycles = cycle;
      break;
    }

    if (!progress) {
      // Anything still in flight will mature and re-enable progress.
      bool in_flight = false;
      for (const auto& ch : channels) {
        if (!ch.queue.empty() && ch.queue.front().arrival > cycle) in_flight = true;
        // A throttled remote link recovers as credit refills.
        if (ch.bandwidth < static_cast<double>(w)) in_flight = true;
      }
      for (const auto& u : units) {
        if (!u.pipe.empty() && u.pipe.front().second > cycle) in_flight = true;
      }
      if (!in_flight) {
        result.outcome = SimOutcome::Deadlock;
        result.total_cycles = cycle;
        break;
      }
    }
  }

  if (result.outcome == SimOutcome::LimitExceeded) result.total_cycles = limit;

  // --- deadlock witness: one cycle in the wait-for relation ---
  if (result.outcome == SimOutcome::Deadlock) {
    std::vector<WaitFor> waits;
    std::map<std::string, std::vector<std::pair<int, std::size_t>>> edges;  // node -> (blocker, wait idx)
    auto channel_name = [&](int c) {
      const Channel& ch = graph.channels[static_cast<std::size_t>(c)];
      return graph.nodes[static_cast<std::size_t>(ch.producer)].id + "->" +
             graph.nodes[static_cast<std::size_t>(ch.consumer)].id;
    };
    for (int ni : reverse_order) {
      const DataflowNode& node = graph.nodes[static_cast<std::size_t>(ni)];
      auto add_wait = [&](int c, bool not_empty) {
        const Channel& ch = graph.channels[static_cast<std::size_t>(c)];
        waits.push_back({node.id, channel_name(c), not_empty});
        edges[node.id].push_back({not_empty ? ch.producer : ch.consumer, waits.size() - 1});
      };
      if (node.kind == NodeKind::MemoryWriter) {
        if (writers[static_cast<std::size_t>(ni)].received < n_vectors) {
          add_wait(ins[static_cast<std::size_t>(ni)][0], true);
        }
      } else if (node.kind == NodeKind::MemoryReader) {
        if (readers[static_cast<std::size_t>(ni)].next_vec < n_vectors) {
          for (int c : outs[static_cast<std::size_t>(ni)]) {
            if (!channels[static_cast<std::size_t>(c)].can_push(w)) add_wait(c, false);
          }
        }
      } else {
        const UnitState& u = units[static_cast<std::size_t>(ni)];
        if (u.done()) continue;
        bool pipe_due = !u.pipe.empty() && u.pipe.front().second <= result.total_cycles;
        if (pipe_due || (u.step >= u.init && u.step < u.total_steps && u.latency == 0)) {
          for (int c : outs[static_cast<std::size_t>(ni)]) {
            if (!channels[static_cast<std::size_t>(c)].can_push(w)) add_wait(c, false);
          }
        }
        if (u.step < n_vectors) {
          for (const auto& [field, c] : u.in_channel) {
            (void)field;
            if (!channels[static_cast<std::size_t>(c)].can_pop(result.total_cycles)) {
              add_wait(c, true);
            }
          }
        }
      }
    }
    // Walk the wait-for edges until a node repeats; the tail is a cycle.
    for (const auto& [start, start_edges] : edges) {
      (void)start_edges;
      if (!result.witness.empty()) break;
      std::vector<std::string> path;
      std::vector<std::size_t> path_wait;
      std::string cur = start;
      while (true) {
        auto seen = std::find(path.begin(), path.end(), cur);
        if (seen != path.end()) {
          for (std::size_t i = static_cast<std::size_t>(seen - path.begin()); i < path.size();
               ++i) {
            result.witness.push_back(waits[path_wait[i]]);
          }
          break;
        }
        auto it = edges.find(cur);
        if (it == edges.end() || it->second.empty()) break;
        path.push_back(cur);
        path_wait.push_back(it->second[0].second);
        cur = graph.nodes[static_cast<std::size_t>(it->second[0].first)].id;
      }
    }
    if (result.witness.empty()) result.witness = waits;  // fallback: report all blocked nodes
  }

  for (std::size_t c = 0; c < channels.size(); ++c) result.channels[c] = channels[c].stats;
  for (std::size_t i = 0; i < graph.nodes.size(); ++i) {
    if (graph.nodes[i].kind == NodeKind::MemoryWriter) {
      result.outputs.emplace(graph.nodes[i].field, std::move(writers[i].out));
    }
  }
  return result;
}

std::string simulation_to_json(const DataflowGraph& graph, const SimulationResult& result) {
  nlohmann::json doc;
  doc["outcome"] = result.outcome == SimOutcome::Completed   ? "completed"
                   : result.outcome == SimOutcome::Deadlock ? "deadlock"
                                                             : "limit_exceeded";
  doc["cycles"] = result.total_cycles;
  nlohmann::json chs = nlohmann::json::array();
  for (std::size_t c = 0; c < result.channels.size(); ++c) {
    const Channel& ch = graph.channels[c];
    const ChannelStats& st = result.channels[c];
    chs.push_back({{"from", graph.nodes[static_cast<std::size_t>(ch.producer)].id},
                   {"to", graph.nodes[static_cast<std::size_t>(ch.consumer)].id},
                   {"field", ch.field},
                   {"capacity", ch.depth},
                   {"max_occupancy", st.max_occupancy},
                   {"push_stalls", st.push_stalls},
                   {"pop_stalls", st.pop_stalls}});
  }
  doc["channels"] = chs;
  if (!result.witness.empty()) {
    nlohmann::json wit = nlohmann::json::array();
    for (const auto& wf : result.witness) {
      wit.push_back({{"node", wf.node},
                     {"channel", wf.channel},
                     {"waiting_for", wf.waiting_not_empty ? "not_empty" : "not_full"}});
    }
    doc["deadlock_witness"] = wit;
  }
  nlohmann::json outs = nlohmann::json::object();
  for (const auto& [name, arr] : result.outputs) {
    std::int64_t invalid = 0;
    for (auto v : arr.valid) invalid += v ? 0 : 1;
    outs[name] = {{"elements", arr.size()}, {"invalid", invalid}};
  }
  doc["outputs"] = outs;
  return doc.dump(2) + "\n";
}

}  // namespace stencilpipe
