#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace vitreforge {

// Seeded generator used everywhere randomness is needed (synthetic
// checkpoints, verification inputs). mt19937_64 has a standard-specified
// sequence, and the Gaussian transform is written out here instead of using
// std::normal_distribution, whose output differs between stdlibs.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    // uniform double in [0, 1)
    double uniform() {
        return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Box-Muller; one fresh pair per two draws
    float normal(float mean = 0.0f, float sigma = 1.0f) {
        if (has_spare_) {
            has_spare_ = false;
            return mean + sigma * static_cast<float>(spare_);
        }
        double u1 = 1.0 - uniform();  // (0, 1]
        double u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double theta = 2.0 * 3.14159265358979323846 * u2;
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return mean + sigma * static_cast<float>(r * std::cos(theta));
    }

    // uniform integer in [lo, hi] via rejection-free modulo (bias negligible
    // for the small ranges used in tests)
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
        return lo + static_cast<std::int64_t>(gen_() % static_cast<std::uint64_t>(hi - lo + 1));
    }

private:
    std::mt19937_64 gen_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace vitreforge
