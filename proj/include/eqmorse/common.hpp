/*
   Copyright 2026 The eqmorse Authors

   Licensed under the Apache License, Version 2.0 (the "License");
   you may not use this file except in compliance with the License.
   You may obtain a copy of the License at

        http://www.apache.org/licenses/LICENSE-2.0

   Unless required by applicable law or agreed to in writing, software
   distributed under the License is distributed on an "AS IS" BASIS,
   WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
   See the License for the specific language governing permissions and
   limitations under the License.
*/

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <functional>
#include <numbers>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace eqmorse {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// Base class of every error raised by the engine. `kind()` is a stable
/// machine-readable tag that reports and exit-code logic switch on.
class Error : public std::runtime_error {
   public:
    Error(std::string kind, const std::string& what) : std::runtime_error(what), kind_(std::move(kind)) {}
    const std::string& kind() const noexcept { return kind_; }

   private:
    std::string kind_;
};

#define EQMORSE_DEFINE_ERROR(Name, tag)                                           \
    class Name : public Error {                                                   \
       public:                                                                    \
        explicit Name(const std::string& what) : Error(tag, what) {}              \
    };

EQMORSE_DEFINE_ERROR(StructuralError, "structural")
EQMORSE_DEFINE_ERROR(NotAComplex, "not-a-complex")
EQMORSE_DEFINE_ERROR(RetractionDivergence, "retraction-divergence")
EQMORSE_DEFINE_ERROR(StiffRegion, "stiff-region")
EQMORSE_DEFINE_ERROR(AmbiguousCapture, "ambiguous-capture")
EQMORSE_DEFINE_ERROR(DegenerateCriticalPoint, "degenerate-critical-point")
EQMORSE_DEFINE_ERROR(NotMorse, "not-morse")
EQMORSE_DEFINE_ERROR(NotMorseSmale, "not-morse-smale")
EQMORSE_DEFINE_ERROR(ResolutionExhausted, "resolution-exhausted")
EQMORSE_DEFINE_ERROR(CountInconsistency, "count-inconsistency")
EQMORSE_DEFINE_ERROR(NonTransversal, "non-transversal")
EQMORSE_DEFINE_ERROR(OrbitCollision, "orbit-collision")
EQMORSE_DEFINE_ERROR(LimitUnresolved, "limit-unresolved")
EQMORSE_DEFINE_ERROR(AssemblyRefused, "assembly-refused")

#undef EQMORSE_DEFINE_ERROR

/// Wraps an angle into [0, 2*pi).
inline double wrap_angle(double s) {
    double w = std::fmod(s, kTwoPi);
    if (w < 0) w += kTwoPi;
    if (w >= kTwoPi) w = 0.0;
    return w;
}

/// Shortest distance between two angles on the circle.
inline double angle_distance(double a, double b) {
    double d = std::fabs(wrap_angle(a) - wrap_angle(b));
    return std::min(d, kTwoPi - d);
}

/// Worker count for parallel sweeps; EQMORSE_WORKERS overrides the hardware default.
inline unsigned worker_count() {
    if (const char* env = std::getenv("EQMORSE_WORKERS")) {
        int w = std::atoi(env);
        if (w > 0) return static_cast<unsigned>(w);
    }
    unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1u : hw;
}

/// Runs body(i) for i in [0, count). Results must be written to per-index
/// slots so the outcome does not depend on scheduling. If any call throws,
/// the exception of the lowest failing index is rethrown on the caller.
template <class Body>
void parallel_for(std::size_t count, Body&& body) {
    unsigned workers = static_cast<unsigned>(std::min<std::size_t>(worker_count(), count));
    if (workers <= 1) {
        for (std::size_t i = 0; i < count; ++i) body(i);
        return;
    }
    std::vector<std::exception_ptr> failures(count);
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            for (std::size_t i = w; i < count; i += workers) {
                try {
                    body(i);
                } catch (...) {
                    failures[i] = std::current_exception();
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    for (auto& f : failures)
        if (f) std::rethrow_exception(f);
}

}  // namespace eqmorse
