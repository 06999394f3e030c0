// Apache License, Version 2.0, refer to LICENSE.txt
#pragma once

#include <string>
#include <string_view>

#include "condopt/condopt.hpp"

namespace condopt {

/// JSON document holding the spaces, prior, training data and every stored
/// node (path, n, log_phi, log_m, rho_post, lambda_post, children). Doubles
/// are written in shortest round-trip form, so a reload is bit-exact.
std::string serialize_model(const PosteriorTree& tree);

/// Throws InputError for malformed or inconsistent documents.
PosteriorTree parse_model(std::string_view text);

}  // namespace condopt
