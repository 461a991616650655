#pragma once

#include "mixlab/config.hpp"

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace mixlab {

enum class Status { pass, fail, skip };
const char* status_name(Status s);

struct InvariantInfo {
  std::string id;
  std::string module;
  std::string description;
};

/// Every invariant the suite knows about, in manifest order.
const std::vector<InvariantInfo>& invariant_catalog();

/// Pass/fail/skip per invariant ID. Recording an ID twice merges the results
/// (fail dominates pass, pass dominates skip) and joins the details.
class InvariantLog {
 public:
  struct Entry {
    Status status = Status::skip;
    std::string detail;
  };

  void record(const std::string& id, Status status, const std::string& detail);
  void check(const std::string& id, bool ok, const std::string& detail) {
    record(id, ok ? Status::pass : Status::fail, detail);
  }
  bool has(const std::string& id) const { return entries_.count(id) != 0; }
  const Entry& at(const std::string& id) const { return entries_.at(id); }
  bool any_failed() const;

 private:
  std::map<std::string, Entry> entries_;
};

struct RunOptions {
  std::string out_dir;  // empty: use the config's output_dir
  std::uint64_t seed_offset = 0;
  bool quiet = false;
  std::ostream* log = nullptr;  // progress lines unless quiet; defaults to std::cerr
};

struct CommandResult {
  int exit_code = 0;  // 0 pass, 1 config error, 2 invariant failure, 3 solver failure
  std::string manifest_path;
  std::string message;
};

/// Runs one of assemble | singular | sobolev | nehari | verify and writes its
/// CSV/text outputs plus manifest.json into the output directory. Never throws.
CommandResult run_command(const std::string& command, const ExperimentConfig& cfg,
                          const RunOptions& opt);

/// Same as run_command but loads the config first (empty path: defaults).
CommandResult run_command_file(const std::string& command, const std::string& config_path,
                               const RunOptions& opt);

const std::vector<std::string>& command_names();

}  // namespace mixlab
