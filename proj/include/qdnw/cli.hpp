#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "qdnw/config.hpp"

namespace qdnw::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;
/// A computed quantity failed its mathematical check.
inline constexpr int kExitAssertion = 2;

struct RunOptions {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out_dir;
    int threads = 1;
    double tol_scale = 1.0;
    /// expand: accept a vanishing nonlinearity and emit zero fields.
    bool zero_check = false;
    /// solve/expand: run even when the nonlinearity violates assumption (A).
    bool allow_violation = false;
};

const std::vector<std::string>& subcommands();

/// Runs one subcommand against a loaded config. Reports go to the output
/// directory; a one-line summary goes to out, diagnostics to err.
int run(const std::string& subcommand, const ScenarioConfig& cfg, const RunOptions& opt, std::ostream& out,
        std::ostream& err);

/// Loads the config then dispatches; every library error becomes exit code 1.
int run_file(const std::string& subcommand, const RunOptions& opt, std::ostream& out, std::ostream& err);

/// Full command line entry point.
int main(int argc, char** argv);

}  // namespace qdnw::cli
