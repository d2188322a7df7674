#pragma once

#include <iosfwd>
#include <string>

#include "rvm/iteration.hpp"
#include "rvm/verify.hpp"

namespace rvm::cli {

enum Exit : int { kOk = 0, kConfig = 1, kNumerical = 2, kIo = 3, kHardCheck = 4 };

struct RunFlags {
    bool resume = false;
    bool quiet = false;
};

int cmd_run(const std::string& config_path, const std::string& out_dir, const RunFlags& flags = {});
int cmd_verify(const std::string& run_dir, const std::string& checks_filter, const SuiteOptions& base = {});
int cmd_linear(const std::string& config_path, const std::string& out_dir);
int cmd_report(const std::string& run_dir, std::ostream& os);

// latest iterate of a run directory; throws IoError naming the failing path
RunArtifacts load_run(const std::string& run_dir);
std::string latest_manifest(const std::string& run_dir);

// frozen CSV layouts
std::string summary_csv(const std::vector<IterateRecord>& history);
std::string series_csv(const std::string& header, const std::vector<std::pair<double, double>>& rows);

int main(int argc, char** argv);

}  // namespace rvm::cli
