#pragma once

#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "orliczfb/analysis.hpp"
#include "orliczfb/gfunction.hpp"
#include "orliczfb/solver.hpp"

namespace orliczfb::cli {

/// Exit codes of the command-line front end.
enum ExitCode : int { kPass = 0, kNumericalFailure = 1, kUsageError = 2 };

/// Malformed or inconsistent run configuration.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct GridSpec {
    int nx = 65;
    int ny = 33;
    double Lx = 2.0;
    double Ly = 1.0;
};

enum class Phi0Kind { Strip, ConstantLeft, Zero, File };

struct Phi0Spec {
    Phi0Kind kind = Phi0Kind::Strip;
    /// Strip: phi0 = (a - s x)^+ with s = lambda* (1 when lambda = 0).
    double a = 1.0;
    /// ConstantLeft: phi0 = value on the side x = 0, zero on the other sides.
    double value = 1.0;
    /// File: ORLICZFB field whose boundary values are used.
    std::string file;
};

struct Oracle1DSpec {
    double a = 1.0;
    double b = 0.0;
    double L = 2.0;
    int n = 101;
};

struct BlowupSpec {
    std::optional<Point2> x0;
    /// Empty selects 4h, 8h, ... up to the largest admissible radius.
    std::vector<double> rho;
    int m = 65;
};

struct RunConfig {
    std::optional<GFunction> gfunction;
    double lambda = 0.0;
    GridSpec grid;
    Phi0Spec phi0;
    SolveOptions solve;
    /// Refinement sweep: cells per unit length for each level (empty: single solve).
    std::vector<int> refine;
    Oracle1DSpec oracle1d;
    VerifyConfig verify;
    BlowupSpec blowup;
    std::string out_dir = ".";
};

/// Parses the sectioned key = value format (see docs/config.md). Unknown sections or
/// keys, unparsable numbers and module precondition violations throw ConfigError.
RunConfig parse_config(std::istream& in);
RunConfig load_config(const std::string& path);

/// Grid with the configured boundary data.
std::shared_ptr<const Grid> build_grid(const RunConfig& cfg);
/// Strip-preset grid with `cells` cells per unit length.
std::shared_ptr<const Grid> build_grid(const RunConfig& cfg, int cells);

int cmd_gcheck(const RunConfig& cfg, std::ostream& out);
int cmd_lambda_star(const RunConfig& cfg, std::ostream& out);
int cmd_solve1d(const RunConfig& cfg, std::ostream& out);
int cmd_solve2d(const RunConfig& cfg, std::ostream& out);
int cmd_verify(const RunConfig& cfg, const std::string& field_path, std::ostream& out);
int cmd_blowup(const RunConfig& cfg, const std::string& field_path, std::ostream& out);

/// Full command line: `orliczfb <subcommand> [--config p] [--field p] [--out dir]
/// [--seed n] [--mode minimizer|weak]`. Returns the exit code.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace orliczfb::cli
