#ifndef CRAN_CLI_HPP_
#define CRAN_CLI_HPP_

#include <ostream>
#include <string>
#include <vector>

#include "cran/gradcheck.hpp"
#include "cran/run_config.hpp"

namespace cran::cli {

// Gradient check behind `cran gradcheck`: total_loss of `cfg` on a seeded
// 2-pair synthetic batch, parameters initialized from the same seed.
ad::GradCheckReport gradcheck_config(const RunConfig& cfg,
                                     const ad::GradCheckOptions& options);

// Runs one subcommand (gen-data, train, eval, gradcheck, encode). `args`
// excludes the program name. Returns the process exit status: 0 only when
// the command fully succeeded, 1 for runtime failures, 2 for usage errors.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace cran::cli

#endif  // CRAN_CLI_HPP_
