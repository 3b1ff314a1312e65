#pragma once

// Single-site operators for spin-1/2. Local basis index 1 is spin up
// (Z = +1) and index 0 is spin down, so a product state written as bits
// |11..1> is fully up-magnetized. The matrices below satisfy XY = iZ.

#include <xxzb/tensor.hpp>

namespace xxzb::pauli {

using Op = Eigen::Matrix2cd;

inline Op identity() { return Op::Identity(); }

inline Op x() {
    Op m;
    m << 0.0, 1.0, 1.0, 0.0;
    return m;
}

inline Op y() {
    const cplx i{0.0, 1.0};
    Op m;
    m << 0.0, i, -i, 0.0;
    return m;
}

inline Op z() {
    Op m;
    m << -1.0, 0.0, 0.0, 1.0;
    return m;
}

// Raises down (0) to up (1).
inline Op raise() {
    Op m;
    m << 0.0, 0.0, 1.0, 0.0;
    return m;
}

inline Op lower() { return raise().transpose(); }

// Two-site operator a (x) b with row index s1*2 + s2.
inline Eigen::Matrix4cd kron(const Op& a, const Op& b) {
    Eigen::Matrix4cd k;
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j)
            for (int p = 0; p < 2; ++p)
                for (int q = 0; q < 2; ++q) k(2 * i + p, 2 * j + q) = a(i, j) * b(p, q);
    return k;
}

} // namespace xxzb::pauli
