#pragma once

// Leak oracle for simulated typing sessions.

#include <string>

#include "xplat/synth.hpp"

namespace xplat::testing {

using synth::TypedEntry;
using synth::SimOptions;
using synth::simulate_entry;

/// Empty when no retained string of `entry` exposes a character of the
/// session's PII; otherwise a description of the first leak.
std::string find_leak(const TypedEntry& typed, const redact::SanitizedEntry& entry);

}  // namespace xplat::testing
