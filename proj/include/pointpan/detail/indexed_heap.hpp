#pragma once

#include <algorithm>
#include <cstdint>
#include <utility>
#include <vector>

namespace pointpan::detail {

/// Addressable 4-ary min-heap over integer keys [0, capacity) with
/// decrease-key. Equal priorities pop in ascending key order, so a run is
/// fully determined by its inputs.
template <typename Priority>
class IndexedHeap {
 public:
  explicit IndexedHeap(std::size_t capacity) : pos_(capacity, kAbsent) {}

  bool empty() const { return heap_.empty(); }
  bool contains(std::int32_t key) const { return pos_[key] != kAbsent; }

  void push_or_decrease(std::int32_t key, Priority p) {
    if (pos_[key] == kAbsent) {
      heap_.push_back({p, key});
      pos_[key] = static_cast<std::int32_t>(heap_.size() - 1);
      sift_up(heap_.size() - 1);
    } else {
      std::size_t i = pos_[key];
      heap_[i].first = p;
      sift_up(i);
    }
  }

  std::pair<Priority, std::int32_t> pop() {
    auto top = heap_.front();
    pos_[top.second] = kAbsent;
    if (heap_.size() > 1) {
      heap_.front() = heap_.back();
      pos_[heap_.front().second] = 0;
      heap_.pop_back();
      sift_down(0);
    } else {
      heap_.pop_back();
    }
    return top;
  }

 private:
  static constexpr std::int32_t kAbsent = -1;
  static constexpr std::size_t kArity = 4;

  static bool less(const std::pair<Priority, std::int32_t>& a, const std::pair<Priority, std::int32_t>& b) {
    return a.first < b.first || (a.first == b.first && a.second < b.second);
  }

  void place(std::size_t i, std::pair<Priority, std::int32_t> e) {
    heap_[i] = e;
    pos_[e.second] = static_cast<std::int32_t>(i);
  }

  void sift_up(std::size_t i) {
    auto e = heap_[i];
    while (i > 0) {
      const std::size_t parent = (i - 1) / kArity;
      if (!less(e, heap_[parent])) break;
      place(i, heap_[parent]);
      i = parent;
    }
    place(i, e);
  }

  void sift_down(std::size_t i) {
    auto e = heap_[i];
    const std::size_t n = heap_.size();
    for (;;) {
      const std::size_t first = i * kArity + 1;
      if (first >= n) break;
      std::size_t best = first;
      const std::size_t last = std::min(first + kArity, n);
      for (std::size_t c = first + 1; c < last; ++c)
        if (less(heap_[c], heap_[best])) best = c;
      if (!less(heap_[best], e)) break;
      place(i, heap_[best]);
      i = best;
    }
    place(i, e);
  }

  std::vector<std::pair<Priority, std::int32_t>> heap_;
  std::vector<std::int32_t> pos_;
};

}  // namespace pointpan::detail
