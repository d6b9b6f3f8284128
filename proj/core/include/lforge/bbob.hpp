#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>
#include <utility>
#include <vector>

#include "lforge/function.hpp"

namespace lforge::bbob {

inline constexpr int kFunctionCount = 24;
inline constexpr double kBound = 5.0;

/// Instance seeding convention: every random quantity of instance
/// (function_id, instance_id, dim) is drawn from
///   Rng(derive_seed(kSeedSalt, {function_id, instance_id, dim}))
/// in a fixed order: x_opt, f_opt, then the rotation matrices and any
/// function-specific draws.
inline constexpr std::uint64_t kSeedSalt = 0x6262'6f62'2d6c'666fULL;

struct Instance {
    int function_id = 0;
    int instance_id = 0;
    std::size_t dim = 0;
    std::vector<double> x_opt;
    double f_opt = 0.0;
    std::uint64_t seed = 0;
};

struct Problem {
    Instance instance;
    ObjectiveFunction function;
};

std::string_view function_name(int function_id);

/// Builds the noiseless BBOB function `function_id` (1..24) on [-5, 5]^dim.
/// Throws std::out_of_range for an invalid id or dim == 0.
Problem instantiate(int function_id, int instance_id, std::size_t dim);

std::pair<std::vector<double>, double> optimum(Instance const& instance);

} // namespace lforge::bbob
