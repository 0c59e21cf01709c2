#pragma once

namespace riskq {

// Version string embedded in every CSV/JSON output for provenance.
inline constexpr const char* version_string = "riskq 0.1.0";

} // namespace riskq
