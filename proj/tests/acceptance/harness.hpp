#pragma once

#include <string>

namespace acceptance {

// Prints one PASS/FAIL line per checked criterion and tracks the exit code.
class Harness {
public:
  void criterion(const std::string& id, bool ok, const std::string& detail);
  void note(const std::string& message);
  int finish() const;

private:
  int failures_ = 0;
  int passes_ = 0;
};

}  // namespace acceptance
