#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "sysid/model.hpp"

namespace sysid {

/// One buffer's worth of consecutive samples X_{tS}, ..., X_{tS+S}. The last
/// entry is the look-ahead sample, which is also the first sample of buffer
/// t+1. The view is invalidated by the next call to BufferWindow::next().
struct BufferView {
  std::uint64_t index = 0;
  std::span<const Vector> samples;

  std::size_t span_size() const { return samples.size() - 1; }
};

/// Cuts a sample stream into non-overlapping buffers of S samples, keeping
/// one look-ahead sample. Each source sample is read exactly once; a partial
/// trailing buffer is discarded.
class BufferWindow {
public:
  explicit BufferWindow(std::uint64_t span);

  /// Next full buffer, or nullopt once the source cannot fill one.
  std::optional<BufferView> next(SampleSource& source);

  std::uint64_t buffers_emitted() const { return emitted_; }

private:
  std::uint64_t span_;
  std::vector<Vector> window_;
  std::uint64_t emitted_ = 0;
  bool primed_ = false;
  bool exhausted_ = false;
};

enum class OrderPolicy { reverse, forward, random };

std::string_view to_string(OrderPolicy p);

/// A transition (covariate index, target index) into a BufferView.
struct Transition {
  std::uint32_t cov;
  std::uint32_t tgt;

  friend bool operator==(const Transition&, const Transition&) = default;
  friend auto operator<=>(const Transition&, const Transition&) = default;
};

/// The B transitions replayed from one buffer, in replay order. Covariate
/// indices always lie in [u, S-1]; the first u samples are never used.
using TransitionSchedule = std::vector<Transition>;

/// reverse: (S-1,S), (S-2,S-1), ..., (u,u+1)
/// forward: (u,u+1), ..., (S-1,S)
/// random:  uniform permutation of the same pairs, drawn from rng (required).
TransitionSchedule make_schedule(OrderPolicy policy, std::uint64_t B, std::uint64_t u,
                                 SeededRng* rng = nullptr);

/// B draws with replacement from the buffer's transitions; non-default SGD-ER
/// variant.
TransitionSchedule make_schedule_with_replacement(std::uint64_t B, std::uint64_t u, SeededRng& rng);

}  // namespace sysid
