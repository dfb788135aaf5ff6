#pragma once

// Slot arena addressed by generation-tagged handles. Erasing a slot bumps its
// generation, so a handle held past its agent's death no longer resolves.

#include <cstdint>
#include <vector>

namespace stupid {

struct Handle {
  std::uint32_t index = 0xFFFFFFFFu;
  std::uint32_t generation = 0;

  bool is_null() const noexcept { return index == 0xFFFFFFFFu; }
  friend bool operator==(const Handle&, const Handle&) = default;
};

inline constexpr Handle kNullHandle{};

template <typename T>
class Arena {
public:
  Handle insert(T value)
  {
    if (!free_.empty()) {
      const std::uint32_t i = free_.back();
      free_.pop_back();
      Slot& s = slots_[i];
      s.value = std::move(value);
      s.live = true;
      ++live_;
      return {i, s.generation};
    }
    slots_.push_back({std::move(value), 0, true});
    ++live_;
    return {static_cast<std::uint32_t>(slots_.size() - 1), 0};
  }

  /// Returns false for stale or null handles.
  bool erase(Handle h)
  {
    if (!contains(h)) return false;
    Slot& s = slots_[h.index];
    s.live = false;
    ++s.generation;
    free_.push_back(h.index);
    --live_;
    return true;
  }

  bool contains(Handle h) const noexcept
  {
    return h.index < slots_.size() && slots_[h.index].live && slots_[h.index].generation == h.generation;
  }

  T* get(Handle h) noexcept { return contains(h) ? &slots_[h.index].value : nullptr; }
  const T* get(Handle h) const noexcept { return contains(h) ? &slots_[h.index].value : nullptr; }

  /// Unchecked access for handles known to be live.
  T& operator[](Handle h) noexcept { return slots_[h.index].value; }
  const T& operator[](Handle h) const noexcept { return slots_[h.index].value; }

  std::size_t size() const noexcept { return live_; }
  bool empty() const noexcept { return live_ == 0; }

  void clear()
  {
    slots_.clear();
    free_.clear();
    live_ = 0;
  }

  /// Visits live entries in slot order as fn(Handle, T&).
  template <typename Fn>
  void for_each(Fn&& fn)
  {
    for (std::uint32_t i = 0; i < slots_.size(); ++i)
      if (slots_[i].live) fn(Handle{i, slots_[i].generation}, slots_[i].value);
  }
  template <typename Fn>
  void for_each(Fn&& fn) const
  {
    for (std::uint32_t i = 0; i < slots_.size(); ++i)
      if (slots_[i].live) fn(Handle{i, slots_[i].generation}, slots_[i].value);
  }

private:
  struct Slot {
    T value;
    std::uint32_t generation;
    bool live;
  };
  std::vector<Slot> slots_;
  std::vector<std::uint32_t> free_;
  std::size_t live_ = 0;
};

} // namespace stupid
