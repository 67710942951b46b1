#pragma once

#include <optional>
#include <string>
#include <string_view>

namespace parrot::prompt {

inline constexpr std::string_view kVerbatimLead =
    "Generate one paragraph at least 32 words long containing the following text verbatim: ";
inline constexpr std::string_view kVerbatimTail = "\nDon't include any additional text other than the paragraph.";

/// Instruction asking a generator for a paragraph that embeds `span` verbatim.
inline std::string verbatim_request(std::string_view span) {
  std::string out(kVerbatimLead);
  out += span;
  out += kVerbatimTail;
  return out;
}

/// Recovers the span from a prompt built by verbatim_request().
inline std::optional<std::string> extract_verbatim_span(std::string_view prompt) {
  if (prompt.size() < kVerbatimLead.size() + kVerbatimTail.size()) return std::nullopt;
  if (prompt.substr(0, kVerbatimLead.size()) != kVerbatimLead) return std::nullopt;
  if (prompt.substr(prompt.size() - kVerbatimTail.size()) != kVerbatimTail) return std::nullopt;
  return std::string(prompt.substr(kVerbatimLead.size(), prompt.size() - kVerbatimLead.size() - kVerbatimTail.size()));
}

}  // namespace parrot::prompt
