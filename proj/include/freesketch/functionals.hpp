#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>

namespace freesketch {

/// Error function t(y, z) defining a risk functional. The built-in
/// functionals are pure and total on R^2.
struct ErrorFunctional {
    std::string name;
    std::function<double(double, double)> evaluate;
};

namespace functionals {

inline ErrorFunctional squared() {
    return {"squared", [](double y, double z) {
                const double r = y - z;
                return r * r;
            }};
}

inline ErrorFunctional absolute() {
    return {"absolute", [](double y, double z) { return std::abs(y - z); }};
}

inline ErrorFunctional huber(double delta) {
    if (delta <= 0.0) throw std::invalid_argument("huber delta must be positive");
    return {"huber" + std::to_string(delta), [delta](double y, double z) {
                const double r = std::abs(y - z);
                if (r <= delta) return 0.5 * r * r;
                return delta * (r - 0.5 * delta);
            }};
}

/// 1{y != sign(z)} with sign(0) = +1; for +-1 labels this is the
/// classification error of the thresholded predictor.
inline ErrorFunctional sign_mismatch() {
    return {"sign_mismatch", [](double y, double z) {
                const double s = z < 0.0 ? -1.0 : 1.0;
                return y == s ? 0.0 : 1.0;
            }};
}

inline ErrorFunctional from_name(const std::string& name) {
    if (name == "squared") return squared();
    if (name == "absolute") return absolute();
    if (name == "sign_mismatch") return sign_mismatch();
    if (name.rfind("huber", 0) == 0) {
        const std::string arg = name.substr(5);
        return huber(arg.empty() ? 1.0 : std::stod(arg));
    }
    throw std::invalid_argument("unknown functional: " + name);
}

}  // namespace functionals

}  // namespace freesketch
