#pragma once

namespace optocat {

/// Classical fourth-order Runge-Kutta step for y' = f(t, y).
/// `State` needs vector-space operators (+, scalar *).
template <class State, class Rhs>
State rk4_advance(const State& y, double t, double dt, Rhs&& f) {
    const State k1 = f(t, y);
    const State k2 = f(t + 0.5 * dt, State(y + (0.5 * dt) * k1));
    const State k3 = f(t + 0.5 * dt, State(y + (0.5 * dt) * k2));
    const State k4 = f(t + dt, State(y + dt * k3));
    return State(y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4));
}

}  // namespace optocat
