#pragma once

#include <string>
#include <vector>

#include "jlssabs/matrix.hpp"

namespace jlssabs {

/// One Poisson-triggered linear reset: x jumps by R*x at each event.
struct Jump {
    double rate = 0.0;  // events per unit time, >= 0
    Matrix reset;       // n x n
};

/// Jump linear stochastic system
///   dx = (A x + B u + D w) dt + sum_c E_c x dW_c + sum_i R_i x dP^i,
///   y  = C x.
/// Subsystems carry exactly one diffusion channel (a scalar Brownian motion);
/// interconnected systems carry one channel per subsystem.
struct JlssSystem {
    Matrix A;  // n x n
    Matrix B;  // n x m   (m may be 0: autonomous)
    Matrix C;  // q x n
    Matrix D;  // n x p   (p may be 0: no internal input)
    std::vector<Matrix> diffusion;  // each n x n
    std::vector<Jump> jumps;

    Index n() const { return A.rows(); }
    Index m() const { return B.cols(); }
    Index p() const { return D.cols(); }
    Index q() const { return C.rows(); }

    /// Single-channel accessor for subsystem-level code.
    const Matrix& E() const {
        if (diffusion.size() != 1)
            throw InvalidArgsError("JlssSystem::E(): system has " +
                                   std::to_string(diffusion.size()) +
                                   " diffusion channels, expected 1");
        return diffusion.front();
    }

    /// Dimension consistency, finite entries, nonnegative rates.
    void validate() const;
};

/// Internal input block: w_{i,from} of the given width, wired to y_{from,i}.
struct InputBlock {
    int from = 0;
    Index width = 0;
};

/// Output block: a contiguous row slice of C. to == kExternal marks y_ii.
struct OutputBlock {
    static constexpr int kExternal = -1;
    int to = kExternal;
    Index rows = 0;
};

/// A subsystem with its I/O partition. Absent blocks mean "no connection"
/// (h_ji identically zero); a zero C block is still a declared connection.
struct SubsystemSpec {
    int id = 0;
    JlssSystem sys;
    std::vector<InputBlock> inputs;    // partition of D's columns, in order
    std::vector<OutputBlock> outputs;  // partition of C's rows, in order

    /// Row offset of the k-th output block within C.
    Index output_row_offset(std::size_t k) const;
    /// Column offset of the k-th input block within D.
    Index input_col_offset(std::size_t k) const;
    /// C rows of the block addressed to peer `to` (kExternal for y_ii);
    /// 0 x n when no such block is declared.
    Matrix c_block(int to) const;
    bool has_output_to(int to) const;
    const InputBlock* find_input_from(int from) const;
};

/// N subsystems plus wiring w_ij = y_ji.
struct Network {
    int k = 2;  // moment order
    std::vector<SubsystemSpec> subsystems;

    const SubsystemSpec* find(int id) const;
    Index index_of(int id) const;  // position in subsystems, -1 if absent
};

/// Empty iff all interconnection constraints (p_ij = q_ji), block bookkeeping,
/// and per-system invariants hold. Violations are data, not errors.
std::vector<std::string> validate_network(const Network& net);

/// Closed interconnected system per the block construction: off-diagonal drift
/// blocks D_i^(j) C_ji substitute w_ij = y_ji; B block-diagonal; C stacks the
/// external blocks; one diffusion channel per subsystem; jump kinds of distinct
/// subsystems stay distinct. Throws InvalidNetworkError.
JlssSystem interconnect(const Network& net);

/// Total number of distinct Poisson sources across the network.
std::size_t jump_event_count(const Network& net);

}  // namespace jlssabs
