#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace rwdre::verify {

enum class Level { Quick, Full };

// Deliberate faults for exercising the battery itself.
enum class Fault { None, Kernel };

struct Options {
  Level level = Level::Full;
  std::uint64_t seed = 1;
  Fault fault = Fault::None;
  std::vector<int> only;  // criterion ids to run; empty runs all
};

struct Check {
  std::string name;
  bool pass = false;
  std::string detail;
};

struct Criterion {
  int id = 0;
  std::string title;
  std::vector<Check> checks;
  bool pass() const;
};

struct Report {
  Level level = Level::Full;
  std::uint64_t seed = 0;
  std::vector<Criterion> criteria;
  bool pass() const;
  std::vector<int> failures() const;
};

inline constexpr int kCriteria = 11;

std::string criterion_title(int id);
Criterion run_criterion(int id, const Options& opt);
Report run(const Options& opt);

// "criterion <id> <title>: PASS|FAIL" per criterion, each followed by its checks when
// `details` is set. Contains no timings, so equal (level, seed, fault) give equal text.
std::string format(const Report& r, bool details = true);
std::string format_line(const Criterion& c);

Level parse_level(const std::string& s);
const char* level_name(Level l);

}  // namespace rwdre::verify
