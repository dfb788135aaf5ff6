#pragma once

// Multi-worker partition runtime.
//
// Rows are split into stripes on a ring of workers. Every worker keeps a
// full-size grid but only owns the agents and cells of its stripe; the rows
// within halo_radius of the stripe hold read-only copies of its neighbours'
// cells. Workers exchange immutable messages through per-pair mailboxes that
// are only read after a barrier, one barrier per phase:
//
//   A  food production on the stripe (field variant: also on the halo, using
//      the same per-cell draws the owner uses)
//   B  ghost exchange of boundary cells (ghost variant every step)
//   C  local moves in shuffled order; moves into remote cells are lodged as
//      emigration requests and the bug stays put
//   D  requests go to the owners of their destination cells
//   E  owners approve at most one request per destination, and only into a
//      cell still empty after their own local moves
//   F  origins hand approved bugs over; owners insert them
//   G  eat and grow at final positions, ascending bug id
//   H  reproduction / mortality, offspring kept inside the stripe
//   I  predators, restricted to the stripe
//   J  per-worker statistics reduced on rank 0

#include <algorithm>
#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <tuple>
#include <utility>
#include <variant>
#include <vector>

#include "engine.hpp"
#include "errors.hpp"
#include "executor.hpp"
#include "model.hpp"
#include "space.hpp"
#include "world.hpp"

namespace stupid {

enum class Variant { ghost_exchange, field_halo };

inline const char* to_string(Variant v) { return v == Variant::field_halo ? "field" : "ghost"; }

struct GhostCell {
  CellId cell = kNoCell;
  double food = 0.0;
  bool occupied = false;
};

struct EmigrationRequest {
  std::uint64_t request_id = 0;
  int origin = 0;
  AgentId bug_id = 0;
  double size = 0.0;
  CellId destination = kNoCell;
  friend bool operator==(const EmigrationRequest&, const EmigrationRequest&) = default;
};

struct ImmigrationDecision {
  std::uint64_t request_id = 0;
  bool approved = false;
  friend bool operator==(const ImmigrationDecision&, const ImmigrationDecision&) = default;
};

struct BugTransfer {
  std::uint64_t request_id = 0;
  AgentId bug_id = 0;
  double size = 0.0;
  CellId destination = kNoCell;
};

struct StatsPartial {
  std::vector<std::pair<AgentId, double>> sizes; // ascending id
  std::vector<double> row_food_sums;             // stripe rows, ascending
  std::uint64_t predators = 0;
  int first_row = 0;
};

struct PhaseMessage {
  enum class Kind { ghost_update, emigrations, decisions, bug_transfer, stats };
  Kind kind = Kind::ghost_update;
  int sender = 0;
  std::uint64_t step = 0;
  std::variant<std::vector<GhostCell>, std::vector<EmigrationRequest>, std::vector<ImmigrationDecision>,
               std::vector<BugTransfer>, StatsPartial>
      payload;
};

inline const char* to_string(PhaseMessage::Kind k)
{
  switch (k) {
  case PhaseMessage::Kind::ghost_update: return "GhostUpdate";
  case PhaseMessage::Kind::emigrations: return "Emigrations";
  case PhaseMessage::Kind::decisions: return "Decisions";
  case PhaseMessage::Kind::bug_transfer: return "BugTransfer";
  case PhaseMessage::Kind::stats: return "Stats";
  }
  return "?";
}

inline constexpr std::size_t kMessageKinds = 5;

/// Per-pair mailboxes, one per message kind. Slot [to][from][kind] is only
/// appended to by `from` and only drained by `to`; a worker may therefore
/// drain one kind while its neighbours already post the next.
class Transport {
public:
  explicit Transport(int ranks)
      : ranks_(ranks),
        slots_(static_cast<std::size_t>(ranks) * static_cast<std::size_t>(ranks) * kMessageKinds)
  {}

  void send(int from, int to, PhaseMessage m)
  {
    m.sender = from;
    auto& q = slot(to, from, m.kind);
    q.push_back(std::move(m));
  }

  /// Drains the `kind` messages addressed to `to`, ordered by sender. Each
  /// must carry `step`, and no sender may have posted twice.
  std::vector<PhaseMessage> receive(int to, PhaseMessage::Kind kind, std::uint64_t step)
  {
    std::vector<PhaseMessage> out;
    for (int from = 0; from < ranks_; ++from) {
      auto& q = slot(to, from, kind);
      if (q.size() > 1)
        throw ProtocolError("rank " + std::to_string(from) + " sent " + std::to_string(q.size()) + " " +
                            to_string(kind) + " messages to rank " + std::to_string(to) + " in one step");
      for (auto& m : q) {
        if (m.kind != kind || m.step != step)
          throw ProtocolError("rank " + std::to_string(to) + " expected " + to_string(kind) + " for step " +
                              std::to_string(step) + " but rank " + std::to_string(from) + " sent " +
                              to_string(m.kind) + " for step " + std::to_string(m.step));
        out.push_back(std::move(m));
      }
      q.clear();
    }
    return out;
  }

  /// True when no message of any kind is waiting anywhere.
  bool idle() const
  {
    for (const auto& q : slots_)
      if (!q.empty()) return false;
    return true;
  }

private:
  std::vector<PhaseMessage>& slot(int to, int from, PhaseMessage::Kind kind)
  {
    const auto k = static_cast<std::size_t>(kind);
    return slots_[(static_cast<std::size_t>(to) * static_cast<std::size_t>(ranks_) + static_cast<std::size_t>(from)) *
                      kMessageKinds +
                  k];
  }

  int ranks_;
  std::vector<std::vector<PhaseMessage>> slots_;
};

/// Canonical arbitration: requests ordered by (destination, origin rank, bug
/// id); the first request for a cell is approved iff `is_free(destination)`
/// holds, every later one is denied. Decisions come back in that order.
template <typename IsFree>
std::vector<ImmigrationDecision> arbitrate_immigration(std::vector<EmigrationRequest> requests, IsFree&& is_free)
{
  std::sort(requests.begin(), requests.end(), [](const EmigrationRequest& a, const EmigrationRequest& b) {
    return std::tie(a.destination, a.origin, a.bug_id) < std::tie(b.destination, b.origin, b.bug_id);
  });
  std::vector<ImmigrationDecision> out;
  out.reserve(requests.size());
  CellId last = kNoCell;
  for (const auto& r : requests) {
    const bool first_for_cell = r.destination != last;
    last = r.destination;
    out.push_back({r.request_id, first_for_cell && is_free(r.destination)});
  }
  return out;
}

template <typename L>
std::vector<ImmigrationDecision> arbitrate_immigration(const WorldState<L>& owner,
                                                       std::vector<EmigrationRequest> requests)
{
  return arbitrate_immigration(std::move(requests), [&](CellId c) { return owner.is_free(c); });
}

/// The requests one worker lodged during a step, keyed by request id.
class EmigrationRegister {
public:
  struct Entry {
    BugHandle bug;
    EmigrationRequest request;
  };

  void clear() { entries_.clear(); }
  void lodge(BugHandle bug, const EmigrationRequest& q) { entries_.emplace(q.request_id, Entry{bug, q}); }
  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }
  const std::map<std::uint64_t, Entry>& entries() const noexcept { return entries_; }

  /// Matches the owners' answers to the lodged requests and returns the
  /// approved entries in request id order. Every request must be answered
  /// exactly once; an answer to an unknown request means the workers have
  /// fallen out of step.
  std::vector<Entry> settle(const std::vector<ImmigrationDecision>& decisions) const
  {
    std::map<std::uint64_t, bool> answers;
    for (const auto& d : decisions) {
      if (!entries_.count(d.request_id))
        throw ProtocolError("decision for unknown request " + std::to_string(d.request_id));
      if (!answers.emplace(d.request_id, d.approved).second)
        throw ProtocolError("request " + std::to_string(d.request_id) + " answered twice");
    }
    if (answers.size() != entries_.size())
      throw ProtocolError(std::to_string(entries_.size() - answers.size()) + " requests left unanswered");
    std::vector<Entry> approved;
    for (const auto& [id, ok] : answers)
      if (ok) approved.push_back(entries_.at(id));
    return approved;
  }

private:
  std::map<std::uint64_t, Entry> entries_;
};

struct PartitionOptions {
  int workers = 1;
  Variant variant = Variant::ghost_exchange;
  bool threaded = false;
  bool naive_ghosts = false;     // test-only: send the duplicated neighbour-walk list
  bool exact_halo_food = false;  // field variant: also exchange halo food every step
  bool trace = false;
};

struct StepTrace {
  std::uint64_t step = 0;
  std::vector<EmigrationRequest> requests;     // all workers, ascending request id
  std::vector<ImmigrationDecision> decisions;  // all owners, ascending request id
  std::vector<CellId> occupied_after_local_moves;
  std::vector<int> owner_of_request;
};

template <typename L>
struct Worker {
  int rank = 0;
  RowRange stripe;
  WorldState<L> world;
  std::vector<CellId> halo;                           // ascending
  std::vector<std::pair<int, std::vector<CellId>>> sends; // neighbour -> boundary cells it needs
  std::vector<int> neighbors;

  // per-step protocol state
  std::uint64_t next_request = 0;
  EmigrationRegister pending;
  std::map<std::uint64_t, CellId> reserved;
  std::vector<ImmigrationDecision> last_decisions;
  std::uint64_t ghost_cells_this_step = 0;

  bool owns(CellId c) const noexcept
  {
    return stripe.contains(static_cast<int>(c / static_cast<CellId>(world.geometry.width())));
  }
};

template <typename L>
class PartitionRuntime {
public:
  PartitionRuntime(const ModelConfig& cfg, PartitionOptions opts, const HabitatMap* habitat = nullptr)
      : PartitionRuntime(init_world<L>(cfg, habitat), opts)
  {}

  /// Scatters an existing sequential world over `opts.workers` stripes.
  PartitionRuntime(const WorldState<L>& global, PartitionOptions opts)
      : opts_(opts),
        map_(stripe_partition(global.geometry, opts.workers, global.config.move_radius)),
        transport_(opts.workers),
        exec_(std::make_unique<PhaseExecutor>(opts.workers, opts.threaded))
  {
    config_ = global.config;
    const int n = opts.workers;
    const CellId cells = static_cast<CellId>(global.geometry.cell_count());
    workers_.resize(static_cast<std::size_t>(n));
    for (int r = 0; r < n; ++r) {
      Worker<L>& w = workers_[static_cast<std::size_t>(r)];
      w.rank = r;
      w.stripe = map_.stripe(r);
      w.world = WorldState<L>(global.config);
      w.world.step = global.step;
      w.world.rng = RngStreams::derive(global.config.seed, static_cast<std::uint32_t>(r));
      if (n == 1) w.world.rng = global.rng;
      w.world.next_bug_id = global.next_bug_id + static_cast<AgentId>(r) * global.id_stride;
      w.world.id_stride = global.id_stride * static_cast<AgentId>(n);
      for (CellId c = 0; c < cells; ++c) {
        w.world.cells.rate(c) = global.cells.rate(c);
        if (w.owns(c)) w.world.cells.food(c) = global.cells.food(c);
      }
      w.halo = ghost_cells(map_, r);
      w.neighbors = map_.ring_neighbors(r);
      for (int nb : w.neighbors) {
        std::vector<CellId> need;
        if (opts_.naive_ghosts) need = naive_ghost_list(map_, nb, NeighborhoodKind::moore, map_.halo_radius());
        else need = ghost_cells(map_, nb);
        std::vector<CellId> mine;
        for (CellId c : need)
          if (w.owns(c)) mine.push_back(c);
        w.sends.emplace_back(nb, std::move(mine));
      }
    }
    for (BugHandle h : bugs_by_id(global)) {
      const Bug& b = global.bugs[h];
      workers_[static_cast<std::size_t>(map_.owner_of(b.cell))].world.add_bug(b);
    }
    for (Handle h : predators_by_id(global)) {
      const Predator& p = global.predators[h];
      workers_[static_cast<std::size_t>(map_.owner_of(p.cell))].world.predators.insert(p);
    }
    // One exchange up front so every halo starts with its owner's food; the
    // field variant never refreshes occupancy afterwards, so it ignores it here.
    exec_->run([&](int r) { send_ghosts(r); });
    exec_->run([&](int r) { receive_ghosts(r, opts_.variant == Variant::ghost_exchange); });
    startup_ghost_cells_ = 0;
    for (auto& w : workers_) startup_ghost_cells_ += w.ghost_cells_this_step;
  }

  const PartitionMap& map() const noexcept { return map_; }
  const PartitionOptions& options() const noexcept { return opts_; }
  const ModelConfig& config() const noexcept { return config_; }
  const std::vector<Worker<L>>& workers() const noexcept { return workers_; }
  std::uint64_t step_count() const noexcept { return workers_.front().world.step; }
  std::uint64_t startup_ghost_cells() const noexcept { return startup_ghost_cells_; }
  /// Boundary cells shipped by all workers during the last step's exchange.
  std::uint64_t ghost_cells_last_step() const noexcept { return ghost_cells_last_step_; }
  const StepTrace& last_trace() const noexcept { return trace_; }

  StatsRow step()
  {
    const std::uint64_t s = step_count();
    const bool exchange = opts_.variant == Variant::ghost_exchange || opts_.exact_halo_food;
    if (opts_.trace) trace_ = StepTrace{s, {}, {}, {}, {}};
    for (auto& w : workers_) w.ghost_cells_this_step = 0;

    exec_->run([&](int r) {
      produce(r);
      if (exchange) send_ghosts(r);
    });
    exec_->run([&](int r) {
      if (exchange) receive_ghosts(r, opts_.variant == Variant::ghost_exchange);
      local_moves(r);
      send_emigrations(r);
    });
    if (opts_.trace) record_occupancy();
    exec_->run([&](int r) { arbitrate(r); });
    exec_->run([&](int r) { hand_over(r); });
    exec_->run([&](int r) {
      accept(r);
      finish_step(r);
    });
    if (opts_.trace) record_protocol();

    ghost_cells_last_step_ = 0;
    for (auto& w : workers_) ghost_cells_last_step_ += w.ghost_cells_this_step;
    return reduce_stats();
  }

  /// Steps until the config's stop rule holds on the reduced statistics.
  RunReport run()
  {
    return run([](const PartitionRuntime&, const StatsRow&) {});
  }

  /// Steps until the stop rule holds; `on_step(runtime, row)` runs after
  /// every step.
  template <typename OnStep>
  RunReport run(OnStep&& on_step)
  {
    RunReport report;
    Stopwatch clock;
    const StopRule& rule = config_.stop;
    const bool by_size = rule.kind == StopRule::Kind::max_size_reached;
    report.stop_reason = by_size ? StopReason::max_size_reached : StopReason::fixed_steps;
    double current_max = 0.0;
    std::uint64_t live = 0;
    for (auto& w : workers_) {
      current_max = std::max(current_max, max_bugsize(w.world));
      live += w.world.bugs.size();
    }
    while (!check_stop(step_count(), current_max, rule)) {
      if (by_size && live == 0) {
        report.stop_reason = StopReason::extinct;
        break;
      }
      const StatsRow row = step();
      current_max = row.max_size;
      live = row.bug_count;
      report.stats.push_back(row);
      on_step(std::as_const(*this), row);
    }
    report.steps = report.stats.size();
    report.wall_seconds = clock.wall_seconds();
    report.cpu_seconds = clock.cpu_seconds();
    report.diag = diagnostics();
    return report;
  }

  Diagnostics diagnostics() const
  {
    Diagnostics d;
    for (const auto& w : workers_) {
      const Diagnostics& x = w.world.diag;
      d.retry_cap_hits += x.retry_cap_hits;
      d.ghost_cells_sent += x.ghost_cells_sent;
      d.messages_sent += x.messages_sent;
      d.emigration_requests += x.emigration_requests;
      d.approvals += x.approvals;
      d.denials += x.denials;
      d.kills += x.kills;
      d.births += x.births;
      d.reproductions += x.reproductions;
      d.deaths += x.deaths;
    }
    return d;
  }

  /// Reassembles the global world from the owners' stripes. RNG streams are
  /// rank 0's.
  WorldState<L> gather() const
  {
    WorldState<L> g(config_);
    const Worker<L>& w0 = workers_.front();
    g.step = w0.world.step;
    g.rng = w0.world.rng;
    g.diag = diagnostics();
    g.next_bug_id = 0;
    const CellId cells = static_cast<CellId>(g.geometry.cell_count());
    for (CellId c = 0; c < cells; ++c) {
      const Worker<L>& owner = workers_[static_cast<std::size_t>(map_.owner_of(c))];
      g.cells.food(c) = owner.world.cells.food(c);
      g.cells.rate(c) = owner.world.cells.rate(c);
    }
    std::vector<Bug> bugs;
    for (const auto& w : workers_) {
      w.world.bugs.for_each([&](Handle, const Bug& b) { bugs.push_back(b); });
      g.next_bug_id = std::max(g.next_bug_id, w.world.next_bug_id);
    }
    std::sort(bugs.begin(), bugs.end(), [](const Bug& a, const Bug& b) { return a.id < b.id; });
    for (const Bug& b : bugs) {
      if (!g.is_free(b.cell)) throw ProtocolError("two bugs on cell " + std::to_string(b.cell));
      g.add_bug(b);
    }
    std::vector<Predator> preds;
    for (const auto& w : workers_) w.world.predators.for_each([&](Handle, const Predator& p) { preds.push_back(p); });
    std::sort(preds.begin(), preds.end(), [](const Predator& a, const Predator& b) { return a.id < b.id; });
    for (const Predator& p : preds) g.predators.insert(p);
    if (workers_.size() == 1) {
      g.next_bug_id = w0.world.next_bug_id;
      g.id_stride = w0.world.id_stride;
    }
    return g;
  }

  std::uint64_t digest() const { return state_digest(gather()); }

  /// Global ownership and occupancy audit. Empty string when consistent.
  std::string audit() const
  {
    std::map<AgentId, int> seen;
    for (const auto& w : workers_) {
      std::string err;
      w.world.bugs.for_each([&](Handle h, const Bug& b) {
        if (!err.empty()) return;
        if (!w.owns(b.cell)) err = "bug " + std::to_string(b.id) + " held by rank " + std::to_string(w.rank) +
                                   " outside its stripe";
        else if (!(w.world.cells.occupant(b.cell) == h)) err = "bug " + std::to_string(b.id) + " not at its cell";
        else if (auto [it, fresh] = seen.emplace(b.id, w.rank); !fresh)
          err = "bug " + std::to_string(b.id) + " on ranks " + std::to_string(it->second) + " and " +
                std::to_string(w.rank);
      });
      if (!err.empty()) return err;
      std::size_t occupied = 0;
      for (int y = w.stripe.begin; y < w.stripe.end; ++y)
        for (int x = 0; x < w.world.geometry.width(); ++x) {
          const CellId c = w.world.geometry.flat(CellIndex{x, y});
          const Handle h = w.world.cells.occupant(c);
          if (h.is_null()) continue;
          if (is_marker(h)) return "marker left in owned cell " + std::to_string(c);
          const Bug* b = w.world.bugs.get(h);
          if (!b || b->cell != c) return "cell " + std::to_string(c) + " names a bug that is not there";
          ++occupied;
        }
      if (occupied != w.world.bugs.size()) return "rank " + std::to_string(w.rank) + " occupancy count mismatch";
    }
    return {};
  }

private:
  Worker<L>& worker(int r) { return workers_[static_cast<std::size_t>(r)]; }

  void produce(int r)
  {
    Worker<L>& w = worker(r);
    WorldState<L>& world = w.world;
    if (!config_.features.food) return;
    const FoodMode mode = config_.food_mode;
    const std::uint64_t seed = config_.seed;
    const int width = world.geometry.width();
    for (int y = w.stripe.begin; y < w.stripe.end; ++y) {
      const CellId base = static_cast<CellId>(y * width);
      for (int x = 0; x < width; ++x) {
        const CellId c = base + static_cast<CellId>(x);
        world.cells.food(c) = produce_food(world.cells.food(c), world.cells.rate(c), mode, seed, c, world.step);
      }
    }
    if (opts_.variant == Variant::field_halo)
      for (CellId c : w.halo)
        world.cells.food(c) = produce_food(world.cells.food(c), world.cells.rate(c), mode, seed, c, world.step);
  }

  void send_ghosts(int r)
  {
    Worker<L>& w = worker(r);
    for (const auto& [nb, cells] : w.sends) {
      std::vector<GhostCell> update;
      update.reserve(cells.size());
      for (CellId c : cells) update.push_back({c, w.world.cells.food(c), !w.world.is_free(c)});
      w.ghost_cells_this_step += update.size();
      w.world.diag.ghost_cells_sent += update.size();
      ++w.world.diag.messages_sent;
      transport_.send(r, nb, {PhaseMessage::Kind::ghost_update, r, w.world.step, std::move(update)});
    }
  }

  void receive_ghosts(int r, bool with_occupancy)
  {
    Worker<L>& w = worker(r);
    for (auto& m : transport_.receive(r, PhaseMessage::Kind::ghost_update, w.world.step)) {
      for (const GhostCell& g : std::get<std::vector<GhostCell>>(m.payload)) {
        if (w.owns(g.cell)) throw ProtocolError("ghost update for an owned cell");
        w.world.cells.food(g.cell) = g.food;
        if (with_occupancy) w.world.cells.occupant(g.cell) = g.occupied ? kRemoteOccupant : kEmptyOccupant;
      }
    }
  }

  void local_moves(int r)
  {
    Worker<L>& w = worker(r);
    WorldState<L>& world = w.world;
    w.pending.clear();
    w.reserved.clear();
    w.next_request = 0;
    for (BugHandle h : schedule_order(world)) {
      const Bug& b = world.bugs[h];
      const CellId dest = choose_destination(world, b);
      if (dest == b.cell) continue;
      if (w.owns(dest)) {
        world.move_bug(h, dest);
        continue;
      }
      const std::uint64_t id = (static_cast<std::uint64_t>(r) << 32) | w.next_request++;
      w.pending.lodge(h, EmigrationRequest{id, r, b.id, b.size, dest});
      ++world.diag.emigration_requests;
    }
  }

  void send_emigrations(int r)
  {
    Worker<L>& w = worker(r);
    std::map<int, std::vector<EmigrationRequest>> out;
    for (int nb : w.neighbors) out[nb];
    for (const auto& [id, entry] : w.pending.entries()) {
      const int owner = map_.owner_of(entry.request.destination);
      if (!out.count(owner))
        throw ProtocolError("rank " + std::to_string(r) + " requested a move into non-neighbour rank " +
                            std::to_string(owner));
      out[owner].push_back(entry.request);
    }
    for (auto& [nb, list] : out) {
      ++w.world.diag.messages_sent;
      transport_.send(r, nb, {PhaseMessage::Kind::emigrations, r, w.world.step, std::move(list)});
    }
  }

  void arbitrate(int r)
  {
    Worker<L>& w = worker(r);
    std::vector<EmigrationRequest> requests;
    for (auto& m : transport_.receive(r, PhaseMessage::Kind::emigrations, w.world.step))
      for (auto& q : std::get<std::vector<EmigrationRequest>>(m.payload)) {
        if (!w.owns(q.destination)) throw ProtocolError("emigration request routed to the wrong owner");
        requests.push_back(q);
      }
    std::map<std::uint64_t, const EmigrationRequest*> by_id;
    for (const auto& q : requests) by_id[q.request_id] = &q;
    const auto decisions = arbitrate_immigration(w.world, requests);
    std::map<int, std::vector<ImmigrationDecision>> out;
    for (int nb : w.neighbors) out[nb];
    for (const auto& d : decisions) {
      const EmigrationRequest& q = *by_id.at(d.request_id);
      if (d.approved) {
        w.world.cells.occupant(q.destination) = kReservedOccupant;
        w.reserved.emplace(d.request_id, q.destination);
        ++w.world.diag.approvals;
      } else {
        ++w.world.diag.denials;
      }
      out[q.origin].push_back(d);
    }
    w.last_decisions = decisions;
    for (auto& [nb, list] : out) {
      ++w.world.diag.messages_sent;
      transport_.send(r, nb, {PhaseMessage::Kind::decisions, r, w.world.step, std::move(list)});
    }
  }

  void hand_over(int r)
  {
    Worker<L>& w = worker(r);
    std::map<int, std::vector<BugTransfer>> out;
    for (int nb : w.neighbors) out[nb];
    std::vector<ImmigrationDecision> decisions;
    for (auto& m : transport_.receive(r, PhaseMessage::Kind::decisions, w.world.step)) {
      auto& list = std::get<std::vector<ImmigrationDecision>>(m.payload);
      decisions.insert(decisions.end(), list.begin(), list.end());
    }
    for (const auto& e : w.pending.settle(decisions)) {
      const Bug b = w.world.bugs[e.bug];
      w.world.remove_bug(e.bug);
      out[map_.owner_of(e.request.destination)].push_back({e.request.request_id, b.id, b.size, e.request.destination});
    }
    for (auto& [nb, list] : out) {
      ++w.world.diag.messages_sent;
      transport_.send(r, nb, {PhaseMessage::Kind::bug_transfer, r, w.world.step, std::move(list)});
    }
  }

  void accept(int r)
  {
    Worker<L>& w = worker(r);
    for (auto& m : transport_.receive(r, PhaseMessage::Kind::bug_transfer, w.world.step)) {
      for (const BugTransfer& t : std::get<std::vector<BugTransfer>>(m.payload)) {
        auto it = w.reserved.find(t.request_id);
        if (it == w.reserved.end() || it->second != t.destination)
          throw ProtocolError("transfer of bug " + std::to_string(t.bug_id) + " without a matching approval");
        w.world.cells.occupant(t.destination) = kEmptyOccupant;
        w.world.add_bug({t.bug_id, t.destination, t.size});
        w.reserved.erase(it);
      }
    }
    if (!w.reserved.empty()) throw ProtocolError("approved migrants never arrived");
  }

  void finish_step(int r)
  {
    Worker<L>& w = worker(r);
    WorldState<L>& world = w.world;
    for (BugHandle h : bugs_by_id(world)) grow(world, world.bugs[h]);
    const auto local = [&w](CellId c) { return w.owns(c); };
    lifecycle_phase(world, local);
    predator_phase(world, local);
    ++world.step;

    StatsPartial part;
    for (BugHandle h : bugs_by_id(world)) part.sizes.emplace_back(world.bugs[h].id, world.bugs[h].size);
    part.row_food_sums = row_food_sums(world, w.stripe.begin, w.stripe.end);
    part.predators = world.predators.size();
    part.first_row = w.stripe.begin;
    transport_.send(r, 0, {PhaseMessage::Kind::stats, r, world.step, std::move(part)});
  }

  StatsRow reduce_stats()
  {
    const std::uint64_t s = step_count();
    auto parts = transport_.receive(0, PhaseMessage::Kind::stats, s);
    if (parts.size() != workers_.size()) throw ProtocolError("stats reduction is missing workers");
    std::vector<std::pair<AgentId, double>> sizes;
    std::vector<double> rows;
    std::uint64_t predators = 0;
    for (auto& m : parts) {
      auto& p = std::get<StatsPartial>(m.payload);
      sizes.insert(sizes.end(), p.sizes.begin(), p.sizes.end());
      rows.insert(rows.end(), p.row_food_sums.begin(), p.row_food_sums.end());
      predators += p.predators;
    }
    std::sort(sizes.begin(), sizes.end());
    std::vector<double> by_id;
    by_id.reserve(sizes.size());
    for (auto& [id, size] : sizes) by_id.push_back(size);
    return stats_from(s, by_id, predators, rows);
  }

  void record_occupancy()
  {
    for (const auto& w : workers_)
      w.world.bugs.for_each([&](Handle, const Bug& b) { trace_.occupied_after_local_moves.push_back(b.cell); });
    std::sort(trace_.occupied_after_local_moves.begin(), trace_.occupied_after_local_moves.end());
    for (const auto& w : workers_)
      for (const auto& [id, entry] : w.pending.entries()) trace_.requests.push_back(entry.request);
    std::sort(trace_.requests.begin(), trace_.requests.end(),
              [](const auto& a, const auto& b) { return a.request_id < b.request_id; });
  }

  void record_protocol()
  {
    for (const auto& w : workers_)
      trace_.decisions.insert(trace_.decisions.end(), w.last_decisions.begin(), w.last_decisions.end());
    std::sort(trace_.decisions.begin(), trace_.decisions.end(),
              [](const auto& a, const auto& b) { return a.request_id < b.request_id; });
    for (const auto& q : trace_.requests) trace_.owner_of_request.push_back(map_.owner_of(q.destination));
  }

  PartitionOptions opts_;
  ModelConfig config_;
  PartitionMap map_;
  Transport transport_;
  std::vector<Worker<L>> workers_;
  std::unique_ptr<PhaseExecutor> exec_;
  std::uint64_t startup_ghost_cells_ = 0;
  std::uint64_t ghost_cells_last_step_ = 0;
  StepTrace trace_;
};

} // namespace stupid
