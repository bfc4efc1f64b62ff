#pragma once

#include "dcad/model.hpp"

#include <random>
#include <string>
#include <vector>

namespace dcad::test {

inline const std::vector<std::string>& bundled_models() {
    static const std::vector<std::string> names = {"box.dcad", "bracket.dcad", "column.dcad", "box_depth.dcad",
                                                   "dresser.dcad"};
    return names;
}

inline std::vector<double> random_params(const CompiledModel& m, std::mt19937_64& rng, double scale = 0.3) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    auto P = m.initial_params();
    for (auto& p : P) p += scale * u(rng) * std::max(std::abs(p), 0.1);
    return P;
}

} // namespace dcad::test
