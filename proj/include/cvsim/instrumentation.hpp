#pragma once

#include <cstdint>

// Per-thread counter of state-evolution calls (symplectic, channel and
// measurement updates). Tests use it to check that static analysis paths
// never touch a state.
namespace cvsim::instrumentation {

std::uint64_t evolution_count() noexcept;
void reset_evolution_count() noexcept;
void note_evolution() noexcept;

}  // namespace cvsim::instrumentation
