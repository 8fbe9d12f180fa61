#include "sysid/replay.hpp"

#include <algorithm>
#include <string>

namespace sysid {

BufferWindow::BufferWindow(std::uint64_t span) : span_(span) {
  if (span_ < 1) {
    throw ValidationError("BufferWindow: buffer span S must be >= 1");
  }
  window_.resize(span_ + 1);
}

std::optional<BufferView> BufferWindow::next(SampleSource& source) {
  if (exhausted_) {
    return std::nullopt;
  }
  std::size_t first = 0;
  if (primed_) {
    // The look-ahead sample opens the next buffer.
    std::swap(window_.front(), window_.back());
    first = 1;
  }
  for (std::size_t j = first; j <= span_; ++j) {
    if (!source.next(window_[j])) {
      exhausted_ = true;
      return std::nullopt;
    }
  }
  primed_ = true;
  return BufferView{emitted_++, std::span<const Vector>(window_)};
}

std::string_view to_string(OrderPolicy p) {
  switch (p) {
    case OrderPolicy::reverse:
      return "reverse";
    case OrderPolicy::forward:
      return "forward";
    case OrderPolicy::random:
      return "random";
  }
  return "?";
}

TransitionSchedule make_schedule(OrderPolicy policy, std::uint64_t B, std::uint64_t u, SeededRng* rng) {
  if (B < 1) {
    throw ValidationError("make_schedule: B must be >= 1");
  }
  const std::uint64_t S = B + u;
  TransitionSchedule out;
  out.reserve(B);
  for (std::uint64_t i = 0; i < B; ++i) {
    const auto cov = static_cast<std::uint32_t>(S - 1 - i);
    out.push_back({cov, cov + 1});
  }
  switch (policy) {
    case OrderPolicy::reverse:
      break;
    case OrderPolicy::forward:
      std::reverse(out.begin(), out.end());
      break;
    case OrderPolicy::random:
      if (rng == nullptr) {
        throw ValidationError("make_schedule: random policy needs an RNG");
      }
      // Fisher-Yates on the forward order, so the draw does not depend on
      // the reverse construction above.
      std::reverse(out.begin(), out.end());
      for (std::size_t i = out.size(); i > 1; --i) {
        std::swap(out[i - 1], out[rng->below(i)]);
      }
      break;
  }
  return out;
}

TransitionSchedule make_schedule_with_replacement(std::uint64_t B, std::uint64_t u, SeededRng& rng) {
  if (B < 1) {
    throw ValidationError("make_schedule_with_replacement: B must be >= 1");
  }
  TransitionSchedule out;
  out.reserve(B);
  for (std::uint64_t i = 0; i < B; ++i) {
    const auto cov = static_cast<std::uint32_t>(u + rng.below(B));
    out.push_back({cov, cov + 1});
  }
  return out;
}

}  // namespace sysid
