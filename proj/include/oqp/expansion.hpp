#pragma once

// Oblivious record expansion: replicate each record to its weight while
// keeping the trace a function of input and output sizes. A prefix-heavy
// weight order needs only a logarithmic set of carry counters; arbitrary
// inputs are first rounded to power-of-two weight classes and reordered into
// a barely prefix-heavy sequence.

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "oqp/primitives.hpp"

namespace oqp {

// Smallest power of two >= w, with 0 mapped to 0.
inline std::int64_t round_weight_pow2(std::int64_t w) {
  if (w < 0) throw DomainMismatch("negative expansion weight");
  if (w <= 1) return w;
  std::int64_t p = 1;
  while (p < w) p = checked_mul(p, 2);
  return p;
}

// A sequence is prefix-heavy when every prefix carries at least its
// proportional share of the total weight: sum_{k<=i} w_k >= i * (W / n).
inline bool is_prefix_heavy(const std::vector<std::int64_t>& w, std::int64_t total) {
  std::int64_t n = std::int64_t(w.size());
  std::int64_t prefix = 0;
  for (std::int64_t i = 1; i <= n; ++i) {
    prefix = checked_add(prefix, w[std::size_t(i - 1)]);
    if (checked_mul(prefix, n) < checked_mul(i, total)) return false;
  }
  return true;
}

// Per-step observer state: records emitted during the step and the carry
// counters (origin position -> remaining copies) right after it.
struct ExpandStep {
  std::vector<Tuple> emitted;
  std::map<std::int64_t, std::int64_t> counters;
};

struct ExpandDebug {
  std::vector<ExpandStep> steps;
};

// Expands a prefix-heavy sequence into exactly `total` slots: record i lands
// in a contiguous run of w_i output slots. Surplus records wait in TM carry
// counters; the deficit of light steps is drained from the counter with the
// smallest origin position. Throws NotPrefixHeavy when a deficit cannot be
// covered. The counter high-water mark is recorded in the engine stats.
inline RelHandle expand_prefix_heavy(Engine& eng, const RelHandle& R,
                                     const std::string& w_attr, std::int64_t total,
                                     ExpandDebug* debug = nullptr) {
  std::size_t wi = R.schema.index_of(w_attr);
  if (R.schema.attrs[wi].domain != Domain::Int)
    throw DomainMismatch("expansion weight must be numeric: " + w_attr);
  const std::int64_t n = std::int64_t(R.len);
  RelHandle out = alloc_relation(eng, R.schema, std::size_t(total));
  if (n == 0) {
    if (total != 0) throw SizeMismatch("cannot expand an empty sequence");
    return out;
  }

  // Carry counters keyed by origin position; each holds a buffered row and
  // its outstanding copy count.
  std::map<std::int64_t, std::pair<Tuple, std::int64_t>> counters;
  TmCharge charge(eng.tm(), 0);
  std::size_t row_words = schema_tm_words(R.schema);
  std::size_t hwm = 0;
  auto recharge = [&] {
    charge.resize(counters.size() * (row_words + 2));
    hwm = std::max(hwm, counters.size());
  };

  std::size_t out_pos = 0;
  std::int64_t emitted_target = 0;
  for (std::int64_t i = 1; i <= n; ++i) {
    ExpandStep step;
    auto emit = [&](const RelHandle& rel, std::size_t pos, const Tuple& t) {
      write_tuple(eng, rel, pos, t);
      if (debug) step.emitted.push_back(t);
    };
    Tuple t = read_tuple(eng, R, std::size_t(i - 1));
    if (t[wi].is_null()) throw DomainMismatch("Null expansion weight");
    std::int64_t w = t[wi].as_int();
    if (w < 0) throw DomainMismatch("negative expansion weight");

    std::int64_t step_target = checked_mul(i, total) / n;
    std::int64_t quota = step_target - emitted_target;
    emitted_target = step_target;

    if (w <= quota) {
      for (std::int64_t k = 0; k < w; ++k) emit(out, out_pos++, t);
      quota -= w;
    } else {
      counters.emplace(i, std::make_pair(std::move(t), w));
      recharge();
    }
    while (quota > 0) {
      if (counters.empty())
        throw NotPrefixHeavy("expansion deficit at position " + std::to_string(i));
      auto it = counters.begin();
      std::int64_t take = std::min(it->second.second, quota);
      for (std::int64_t k = 0; k < take; ++k)
        emit(out, out_pos++, it->second.first);
      it->second.second -= take;
      quota -= take;
      if (it->second.second == 0) {
        counters.erase(it);
        recharge();
      }
    }
    if (debug) {
      for (const auto& [pos, rc] : counters) step.counters[pos] = rc.second;
      debug->steps.push_back(std::move(step));
    }
  }
  if (!counters.empty() || std::int64_t(out_pos) != total)
    throw SizeMismatch("expansion weights do not sum to the declared total");
  if (hwm > eng.stats().counter_hwm) eng.stats().counter_hwm = hwm;
  return out;
}

namespace detail {

// Greedy barely prefix-heavy schedule over weight classes: at each position
// take the lightest class that keeps the prefix at or above the running
// average; if none qualifies, take the heaviest remaining (which always
// preserves feasibility since the heaviest class is at least the mean of
// what is left).
class BphSchedule {
 public:
  BphSchedule(const std::map<std::int64_t, std::int64_t>& dist, std::int64_t n,
              std::int64_t total)
      : n_(n), total_(total) {
    for (auto [cls, cnt] : dist) remaining_.emplace_back(cls, cnt);
  }

  std::size_t state_words() const { return 2 * remaining_.size() + 4; }

  // Weight class placed at the next position.
  std::int64_t step() {
    ++pos_;
    std::size_t pick = remaining_.size();
    for (std::size_t k = 0; k < remaining_.size(); ++k) {
      if (remaining_[k].second == 0) continue;
      std::int64_t p = checked_add(prefix_, remaining_[k].first);
      if (checked_mul(p, n_) >= checked_mul(pos_, total_)) {
        pick = k;
        break;  // classes kept ascending; first fit is lightest
      }
    }
    if (pick == remaining_.size()) {
      for (std::size_t k = remaining_.size(); k-- > 0;)
        if (remaining_[k].second > 0) {
          pick = k;
          break;
        }
    }
    if (pick == remaining_.size())
      throw InternalScheduleError("schedule exhausted before position " +
                                  std::to_string(pos_));
    prefix_ = checked_add(prefix_, remaining_[pick].first);
    if (checked_mul(prefix_, n_) < checked_mul(pos_, total_))
      throw InternalScheduleError("schedule lost prefix-heaviness at position " +
                                  std::to_string(pos_));
    --remaining_[pick].second;
    return remaining_[pick].first;
  }

  std::int64_t position() const { return pos_; }

 private:
  std::vector<std::pair<std::int64_t, std::int64_t>> remaining_;  // class asc
  std::int64_t n_;
  std::int64_t total_;
  std::int64_t pos_ = 0;
  std::int64_t prefix_ = 0;
};

}  // namespace detail

// Permutes R into a barely prefix-heavy order of the weight attribute. `dist`
// is the weight-class histogram of R (class -> count); `id_attr` breaks ties
// deterministically. The schedule is computed entirely in TM; records reach
// their slots via one sort by (weight desc, id asc), a slot assignment scan,
// and one sort by slot.
inline RelHandle reorder_barely_prefix_heavy(Engine& eng, const RelHandle& R,
                                             const std::string& w_attr,
                                             const std::string& id_attr,
                                             const std::map<std::int64_t, std::int64_t>& dist) {
  const std::int64_t n = std::int64_t(R.len);
  if (n == 0) return obl_project(eng, R, R.schema.attr_names());
  std::int64_t total = 0;
  std::int64_t count = 0;
  for (auto [cls, cnt] : dist) {
    if (cls < 0 || cnt < 0) throw DomainMismatch("bad weight distribution");
    total = checked_add(total, checked_mul(cls, cnt));
    count = checked_add(count, cnt);
  }
  if (count != n) throw SizeMismatch("weight distribution does not cover the input");

  RelHandle sorted = obl_sort(eng, R, {{w_attr, false}, {id_attr, true}});

  std::size_t wi = sorted.schema.index_of(w_attr);
  // Slot assignment replays the schedule per weight class. Records arrive
  // grouped by class (descending), so one replay per class suffices; within a
  // class, successive records take successive schedule occurrences.
  auto replay = std::make_shared<detail::BphSchedule>(dist, n, total);
  auto cur_class = std::make_shared<std::int64_t>(-1);
  auto fresh = std::make_shared<bool>(true);
  TmCharge state(eng.tm(), replay->state_words() + 4);
  std::map<std::int64_t, std::int64_t> dist_copy(dist);
  RelHandle slotted = augment(
      eng, sorted, int_attr("#slot"),
      [replay, cur_class, fresh, dist_copy, n, total, wi](const Tuple& t) {
        std::int64_t cls = t[wi].as_int();
        if (*fresh || cls != *cur_class) {
          *replay = detail::BphSchedule(dist_copy, n, total);
          *cur_class = cls;
          *fresh = false;
        }
        while (replay->position() < n) {
          std::int64_t placed = replay->step();
          if (placed == cls) return Value(replay->position());
        }
        throw InternalScheduleError("no schedule slot for weight class " +
                                    std::to_string(cls));
      });
  eng.free_arena(sorted.arena);
  RelHandle placed = obl_sort(eng, slotted, {{"#slot", true}});
  eng.free_arena(slotted.arena);
  RelHandle out = obl_project(eng, placed, R.schema.attr_names());
  eng.free_arena(placed.arena);
  return out;
}

// Full expansion pipeline: round weights to power-of-two classes, absorb the
// rounding surplus in one dummy record, reorder to a barely prefix-heavy
// sequence, expand to twice the true total, then rank-filter back down to the
// exact multiset of copies.
inline RelHandle expand(Engine& eng, const RelHandle& R, const std::string& w_attr) {
  std::size_t wi = R.schema.index_of(w_attr);
  if (R.schema.attrs[wi].domain != Domain::Int)
    throw DomainMismatch("expansion weight must be numeric: " + w_attr);
  for (const char* name : {"#Wr", "#EId", "#Rank"})
    if (R.schema.has(name)) throw AttributeCollision(name);

  // m = sum of true weights, validated non-negative in the same pass.
  std::int64_t m = 0;
  {
    TmCharge acc(eng.tm(), 1);
    for (std::size_t k = 0; k < R.len; ++k) {
      Tuple t = read_tuple(eng, R, k);
      if (t[wi].is_null()) throw DomainMismatch("Null expansion weight");
      std::int64_t w = t[wi].as_int();
      if (w < 0) throw DomainMismatch("negative expansion weight");
      m = checked_add(m, w);
    }
  }
  if (m == 0) return alloc_relation(eng, R.schema, 0);
  eng.tm().ensure_budget(R.len + std::size_t(m));

  RelHandle rounded = augment(eng, R, int_attr("#Wr"), [wi](const Tuple& t) {
    return Value(round_weight_pow2(t[wi].as_int()));
  });
  std::int64_t m_rounded = tm_sum(eng, rounded, "#Wr");
  std::int64_t twice = checked_mul(m, 2);
  if (m_rounded >= twice)
    throw InternalScheduleError("rounded weight total not below twice the true total");

  // Dummy record absorbing the gap to 2m; its true weight 0 drops it in the
  // final rank filter.
  Schema dummy_schema;
  dummy_schema.name = "#dummy";
  dummy_schema.attrs = {R.schema.attrs[wi], int_attr("#Wr")};
  RelHandle dummy =
      materialize(eng, dummy_schema,
                  {Tuple{Value(std::int64_t(0)), Value(twice - m_rounded)}});
  RelHandle padded = gen_union(eng, rounded, dummy);
  eng.free_arena(rounded.arena);
  eng.free_arena(dummy.arena);

  auto dist = tm_histogram(eng, padded, "#Wr");
  RelHandle with_id = grouping_identity(eng, padded, {}, {}, "#EId");
  eng.free_arena(padded.arena);
  RelHandle bph = reorder_barely_prefix_heavy(eng, with_id, "#Wr", "#EId", dist);
  eng.free_arena(with_id.arena);
  RelHandle expanded = expand_prefix_heavy(eng, bph, "#Wr", twice);
  eng.free_arena(bph.arena);

  RelHandle ranked = grouping_identity(eng, expanded, {"#EId"}, {}, "#Rank");
  eng.free_arena(expanded.arena);
  std::size_t ri = ranked.schema.index_of("#Rank");
  std::size_t rwi = ranked.schema.index_of(w_attr);
  RelHandle kept = obl_filter_fn(
      eng, ranked,
      [ri, rwi](const Tuple& t) {
        return !t[rwi].is_null() && t[ri].as_int() <= t[rwi].as_int();
      },
      std::size_t(m));
  eng.free_arena(ranked.arena);
  RelHandle out = obl_project(eng, kept, R.schema.attr_names());
  eng.free_arena(kept.arena);
  return out;
}

}  // namespace oqp
