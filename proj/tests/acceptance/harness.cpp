#include "harness.hpp"

#include <cstdio>

namespace acceptance {

void Harness::criterion(const std::string& id, bool ok, const std::string& detail) {
  std::printf("%s %s: %s\n", ok ? "PASS" : "FAIL", id.c_str(), detail.c_str());
  std::fflush(stdout);
  if (ok)
    passes_++;
  else
    failures_++;
}

void Harness::note(const std::string& message) {
  std::printf("     %s\n", message.c_str());
  std::fflush(stdout);
}

int Harness::finish() const {
  std::printf("%d passed, %d failed\n", passes_, failures_);
  return failures_ == 0 ? 0 : 1;
}

}  // namespace acceptance
