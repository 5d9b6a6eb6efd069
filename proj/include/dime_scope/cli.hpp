#pragma once

// Command-line front end.
//
//   dime-scope convert   --in X --out Y --format {csv,binary} [--header]
//                        [--pool {mean,max} --axes ROLES --shape DIMS]
//   dime-scope fit       --train X [--r R | --k K] [--center] --out model.dime
//   dime-scope fit-maha  --train X [--labels y.csv] [--ridge R] --out m.maha
//   dime-scope calibrate --model M --val V [--metric NAME] --out scorer.dime
//   dime-scope score     --scorer S --in Q --out scores.csv [--alpha A]
//   dime-scope score     --baseline {softmax,mc-entropy} --in Q --out scores.csv
//                        [--samples M] [--logits]
//   dime-scope eval      --config eval.toml --out report.csv
//
// Exit status: 0 success, 1 invalid input or arguments, 2 I/O failure.
// Failures print one "error: ..." line to the error stream and leave every
// declared output untouched.

#include <iosfwd>
#include <span>
#include <string>

namespace dime {

// `args` excludes the program name.
int run_cli(std::span<const std::string> args, std::ostream& out, std::ostream& err);
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace dime
