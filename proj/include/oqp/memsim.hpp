#pragma once

// Two-tier memory model. UM arenas record a total-order trace of every slot
// access; the TM scratchpad is capacity-accounted and invisible to the trace.

#include <cstdint>
#include <cstring>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "oqp/errors.hpp"
#include "oqp/sha256.hpp"

namespace oqp {

struct AccessEvent {
  enum class Op : std::uint8_t { Read = 0, Write = 1 };
  Op op;
  std::uint32_t arena;
  std::uint32_t slot;

  friend bool operator==(const AccessEvent&, const AccessEvent&) = default;
};

// Append-only sequence of UM access events. Values written are not part of
// an event; location secrecy is all the trace models. Can run in count-only
// mode for large benchmark runs where storing events is pointless.
class Trace {
 public:
  void set_count_only(bool v) { count_only_ = v; }
  bool count_only() const { return count_only_; }

  void append(AccessEvent::Op op, std::uint32_t arena, std::uint32_t slot) {
    ++count_;
    if (!count_only_) codes_.push_back(encode(op, arena, slot));
  }

  std::uint64_t size() const { return count_; }
  bool empty() const { return count_ == 0; }

  AccessEvent at(std::uint64_t i) const {
    std::uint64_t c = codes_[i];
    return {static_cast<AccessEvent::Op>(c >> 63),
            std::uint32_t((c >> 32) & 0x7fffffffu), std::uint32_t(c)};
  }

  const std::vector<std::uint64_t>& codes() const { return codes_; }

  void clear() {
    codes_.clear();
    count_ = 0;
  }

  // First index at which the two traces differ, or -1 if equal.
  static std::int64_t first_divergence(const Trace& a, const Trace& b) {
    std::uint64_t n = std::min(a.count_, b.count_);
    for (std::uint64_t i = 0; i < n; ++i)
      if (a.codes_[i] != b.codes_[i]) return std::int64_t(i);
    if (a.count_ != b.count_) return std::int64_t(n);
    return -1;
  }

  friend bool operator==(const Trace& a, const Trace& b) {
    return a.count_ == b.count_ && a.codes_ == b.codes_;
  }

 private:
  static std::uint64_t encode(AccessEvent::Op op, std::uint32_t arena,
                              std::uint32_t slot) {
    return (std::uint64_t(op) << 63) | (std::uint64_t(arena) << 32) |
           std::uint64_t(slot);
  }

  std::vector<std::uint64_t> codes_;
  std::uint64_t count_ = 0;
  bool count_only_ = false;
};

// 256-bit digest over the canonical event serialization (8-byte big-endian
// per event, in order). Equal traces give equal digests.
inline std::string trace_digest(const Trace& t) {
  Sha256 h;
  for (std::uint64_t code : t.codes()) {
    std::uint8_t b[8];
    for (int i = 0; i < 8; ++i) b[i] = std::uint8_t(code >> (56 - 8 * i));
    h.update(b, 8);
  }
  return h.hex_digest();
}

struct UmArena {
  std::uint32_t id = 0;
  std::size_t slot_width = 0;
  std::size_t capacity = 0;
  std::vector<std::uint8_t> data;
};

// Arena allocations keyed by capacity only; compared by the verifier
// alongside the trace.
using LayoutLog = std::vector<std::pair<std::uint32_t, std::uint64_t>>;

inline std::size_t tm_budget_words(std::size_t n_plus_m, std::size_t c = 64) {
  std::size_t bits = 0;
  std::size_t v = n_plus_m + 2;
  while ((std::size_t(1) << bits) < v) ++bits;  // ceil(log2(n+m+2))
  return c * bits;
}

// Capacity-accounted trusted scratchpad. Allocations beyond the budget throw;
// TM state never generates access events.
class TmContext {
 public:
  explicit TmContext(std::uint64_t rng_seed = 0x5eed) : rng_(rng_seed) {}

  void set_budget_words(std::size_t w) { budget_ = w; }
  // Budget grows monotonically as the public output size becomes known.
  void ensure_budget(std::size_t n_plus_m, std::size_t c = 64) {
    std::size_t w = tm_budget_words(n_plus_m, c);
    if (budget_ == kUnlimited || w > budget_) budget_ = w;
  }
  std::size_t budget_words() const { return budget_; }
  std::size_t current_words() const { return current_; }
  std::size_t peak_words() const { return peak_; }

  void charge(std::size_t words) {
    if (words > budget_ - current_)
      throw TmBudgetExceeded("TM usage " + std::to_string(current_ + words) +
                             " words exceeds budget " + std::to_string(budget_));
    current_ += words;
    if (current_ > peak_) peak_ = current_;
  }

  void release(std::size_t words) { current_ -= std::min(words, current_); }

  std::mt19937_64& rng() { return rng_; }

  static constexpr std::size_t kUnlimited = std::size_t(-1);

 private:
  std::size_t budget_ = kUnlimited;
  std::size_t current_ = 0;
  std::size_t peak_ = 0;
  std::mt19937_64 rng_;
};

// RAII charge against the TM budget.
class TmCharge {
 public:
  TmCharge(TmContext& tm, std::size_t words) : tm_(&tm), words_(words) {
    tm_->charge(words_);
  }
  TmCharge(const TmCharge&) = delete;
  TmCharge& operator=(const TmCharge&) = delete;
  ~TmCharge() { tm_->release(words_); }

  // Adjust an existing charge to a new size (for growing TM structures).
  void resize(std::size_t words) {
    if (words > words_)
      tm_->charge(words - words_);
    else
      tm_->release(words_ - words);
    words_ = words;
  }
  std::size_t words() const { return words_; }

 private:
  TmContext* tm_;
  std::size_t words_;
};

struct ExecStats {
  std::size_t counter_hwm = 0;  // expansion counter high-water mark
};

// One engine per query execution: UM arenas + trace + TM scratchpad.
class Engine {
 public:
  explicit Engine(std::uint64_t rng_seed = 0x5eed) : tm_(rng_seed) {}

  std::uint32_t alloc_arena(std::size_t slot_width, std::size_t capacity) {
    UmArena a;
    a.id = std::uint32_t(arenas_.size());
    a.slot_width = slot_width;
    a.capacity = capacity;
    a.data.assign(slot_width * capacity, 0);
    layout_.emplace_back(a.id, capacity);
    arenas_.push_back(std::move(a));
    return arenas_.back().id;
  }

  // Releases backing storage of a dead intermediate. The id stays in the
  // layout log; further access is a bug.
  void free_arena(std::uint32_t id) {
    arenas_.at(id).data.clear();
    arenas_.at(id).data.shrink_to_fit();
    arenas_.at(id).capacity = 0;
  }

  const UmArena& arena(std::uint32_t id) const { return arenas_.at(id); }

  void um_read(std::uint32_t arena, std::size_t slot, std::uint8_t* out) {
    const UmArena& a = arenas_.at(arena);
    if (slot >= a.capacity) throw OutOfBounds("read past arena capacity");
    trace_.append(AccessEvent::Op::Read, arena, std::uint32_t(slot));
    std::memcpy(out, a.data.data() + slot * a.slot_width, a.slot_width);
  }

  void um_write(std::uint32_t arena, std::size_t slot, const std::uint8_t* in) {
    UmArena& a = arenas_.at(arena);
    if (slot >= a.capacity) throw OutOfBounds("write past arena capacity");
    trace_.append(AccessEvent::Op::Write, arena, std::uint32_t(slot));
    std::memcpy(a.data.data() + slot * a.slot_width, in, a.slot_width);
  }

  Trace& trace() { return trace_; }
  const Trace& trace() const { return trace_; }
  const LayoutLog& layout_log() const { return layout_; }
  TmContext& tm() { return tm_; }
  const TmContext& tm() const { return tm_; }
  ExecStats& stats() { return stats_; }
  const ExecStats& stats() const { return stats_; }

 private:
  std::vector<UmArena> arenas_;
  Trace trace_;
  LayoutLog layout_;
  TmContext tm_;
  ExecStats stats_;
};

// Trace export: header line with the layout log, then one JSON object per
// event line.
inline void export_trace_jsonl(std::ostream& os, const LayoutLog& layout,
                               const Trace& t) {
  os << "{\"arenas\":[";
  for (std::size_t i = 0; i < layout.size(); ++i) {
    if (i) os << ",";
    os << "[" << layout[i].first << "," << layout[i].second << "]";
  }
  os << "]}\n";
  for (std::uint64_t i = 0; i < t.size(); ++i) {
    AccessEvent e = t.at(i);
    os << "{\"op\":\"" << (e.op == AccessEvent::Op::Read ? "R" : "W")
       << "\",\"arena\":" << e.arena << ",\"slot\":" << e.slot << "}\n";
  }
}

}  // namespace oqp
