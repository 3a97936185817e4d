// The unit circle with f = x and the free rotation of weight 1.
//
// The two arcs joining the critical points cancel mod 2, so d = 0. The single
// jump flow line (rotate the maximum by pi) gives R_1(max) = min, and the
// equivariant cohomology collapses to that of a point.

#include <iostream>

#include "eqmorse/equivariant.hpp"
#include "eqmorse/builtins.hpp"

int main() {
    using namespace eqmorse;
    const Scenario sc = builtin("circle-w1").scenario;
    auto crits = find_critical_points(sc);
    for (const auto& c : crits) std::cout << c.id << ": index " << c.index << ", f = " << c.value << '\n';

    JumpProblem prob(sc, crits, find_crit(crits, "c1_0"), find_crit(crits, "c0_0"), 1);
    auto count = count_k_jump_mod2(prob);
    for (const auto& s : count.solutions)
        std::cout << "jump at s = " << s.config.s[0] << " (residual " << s.certificate.residual << ")\n";
    std::cout << "n_1(max, min) = " << count.parity << '\n';

    auto e = assemble_d_s1(sc, 1, 8);
    auto h = equivariant_homology(e, 8);
    std::cout << "equivariant dims:";
    for (int d : h.table.dims) std::cout << ' ' << d;
    std::cout << '\n';
}
