#pragma once

#include <modp/generators.hpp>

namespace test_maps {
using namespace modp;
using gen::diagonal_flip_map;
using gen::random_sampled_map;
using gen::random_special_map;
}  // namespace test_maps
