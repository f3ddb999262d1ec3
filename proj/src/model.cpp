#include "jlssabs/model.hpp"

#include <algorithm>
#include <set>
#include <sstream>

namespace jlssabs {

void JlssSystem::validate() const {
    const Index nn = n();
    if (A.cols() != nn) throw DimensionMismatchError("JlssSystem: A not square");
    if (B.rows() != nn) throw DimensionMismatchError("JlssSystem: B row count != n");
    if (C.cols() != nn) throw DimensionMismatchError("JlssSystem: C col count != n");
    if (D.rows() != nn) throw DimensionMismatchError("JlssSystem: D row count != n");
    for (const auto& e : diffusion)
        if (e.rows() != nn || e.cols() != nn)
            throw DimensionMismatchError("JlssSystem: diffusion channel not n x n");
    for (const auto& j : jumps) {
        if (j.reset.rows() != nn || j.reset.cols() != nn)
            throw DimensionMismatchError("JlssSystem: reset matrix not n x n");
        if (!(j.rate >= 0.0)) throw InvalidArgsError("JlssSystem: negative jump rate");
    }
    if (!all_finite(A) || !all_finite(B) || !all_finite(C) || !all_finite(D))
        throw InvalidArgsError("JlssSystem: non-finite entry");
    for (const auto& e : diffusion)
        if (!all_finite(e)) throw InvalidArgsError("JlssSystem: non-finite diffusion entry");
    for (const auto& j : jumps)
        if (!all_finite(j.reset)) throw InvalidArgsError("JlssSystem: non-finite reset entry");
}

Index SubsystemSpec::output_row_offset(std::size_t k) const {
    Index off = 0;
    for (std::size_t i = 0; i < k; ++i) off += outputs[i].rows;
    return off;
}

Index SubsystemSpec::input_col_offset(std::size_t k) const {
    Index off = 0;
    for (std::size_t i = 0; i < k; ++i) off += inputs[i].width;
    return off;
}

Matrix SubsystemSpec::c_block(int to) const {
    Index off = 0;
    for (const auto& ob : outputs) {
        if (ob.to == to) return sys.C.middleRows(off, ob.rows);
        off += ob.rows;
    }
    return Matrix(0, sys.n());
}

bool SubsystemSpec::has_output_to(int to) const {
    return std::any_of(outputs.begin(), outputs.end(),
                       [to](const OutputBlock& ob) { return ob.to == to; });
}

const InputBlock* SubsystemSpec::find_input_from(int from) const {
    for (const auto& ib : inputs)
        if (ib.from == from) return &ib;
    return nullptr;
}

const SubsystemSpec* Network::find(int id) const {
    for (const auto& s : subsystems)
        if (s.id == id) return &s;
    return nullptr;
}

Index Network::index_of(int id) const {
    for (std::size_t i = 0; i < subsystems.size(); ++i)
        if (subsystems[i].id == id) return static_cast<Index>(i);
    return -1;
}

std::vector<std::string> validate_network(const Network& net) {
    std::vector<std::string> bad;
    auto note = [&bad](const std::string& s) { bad.push_back(s); };

    std::set<int> ids;
    for (const auto& s : net.subsystems) {
        if (!ids.insert(s.id).second)
            note("duplicate subsystem id " + std::to_string(s.id));
        try {
            s.sys.validate();
        } catch (const Error& e) {
            note("subsystem " + std::to_string(s.id) + ": " + e.what());
        }
        Index qsum = 0;
        std::set<int> seen_out;
        for (const auto& ob : s.outputs) {
            qsum += ob.rows;
            if (ob.to == s.id)
                note("subsystem " + std::to_string(s.id) + ": self-loop output block");
            if (!seen_out.insert(ob.to).second)
                note("subsystem " + std::to_string(s.id) + ": duplicate output block to " +
                     std::to_string(ob.to));
        }
        if (qsum != s.sys.q())
            note("subsystem " + std::to_string(s.id) + ": output block rows sum to " +
                 std::to_string(qsum) + ", C has " + std::to_string(s.sys.q()));
        Index psum = 0;
        std::set<int> seen_in;
        for (const auto& ib : s.inputs) {
            psum += ib.width;
            if (ib.from == s.id)
                note("subsystem " + std::to_string(s.id) + ": self-loop input block");
            if (!seen_in.insert(ib.from).second)
                note("subsystem " + std::to_string(s.id) + ": duplicate input block from " +
                     std::to_string(ib.from));
        }
        if (psum != s.sys.p())
            note("subsystem " + std::to_string(s.id) + ": input block widths sum to " +
                 std::to_string(psum) + ", D has " + std::to_string(s.sys.p()) + " columns");
    }

    // Interconnection constraint p_ij = q_ji; every block must have its peer.
    for (const auto& si : net.subsystems) {
        for (const auto& ib : si.inputs) {
            const SubsystemSpec* sj = net.find(ib.from);
            if (!sj) {
                note("subsystem " + std::to_string(si.id) + ": input from unknown id " +
                     std::to_string(ib.from));
                continue;
            }
            Matrix cji = sj->c_block(si.id);
            if (cji.rows() == 0)
                note("pair (" + std::to_string(si.id) + "," + std::to_string(ib.from) +
                     "): input block has no matching output block");
            else if (cji.rows() != ib.width)
                note("pair (" + std::to_string(si.id) + "," + std::to_string(ib.from) +
                     "): p=" + std::to_string(ib.width) + " but q=" + std::to_string(cji.rows()));
        }
        for (const auto& ob : si.outputs) {
            if (ob.to == OutputBlock::kExternal) continue;
            const SubsystemSpec* sj = net.find(ob.to);
            if (!sj) {
                note("subsystem " + std::to_string(si.id) + ": output to unknown id " +
                     std::to_string(ob.to));
                continue;
            }
            if (!sj->find_input_from(si.id))
                note("pair (" + std::to_string(ob.to) + "," + std::to_string(si.id) +
                     "): output block has no matching input block");
        }
    }
    return bad;
}

JlssSystem interconnect(const Network& net) {
    std::vector<std::string> bad = validate_network(net);
    if (!bad.empty()) {
        std::ostringstream os;
        os << "interconnect: invalid network:";
        for (const auto& s : bad) os << "\n  " << s;
        throw InvalidNetworkError(os.str());
    }

    const std::size_t nsub = net.subsystems.size();
    Index n = 0, m = 0, q = 0;
    std::vector<Index> xoff(nsub), uoff(nsub);
    for (std::size_t i = 0; i < nsub; ++i) {
        xoff[i] = n;
        uoff[i] = m;
        n += net.subsystems[i].sys.n();
        m += net.subsystems[i].sys.m();
        q += net.subsystems[i].c_block(OutputBlock::kExternal).rows();
    }

    JlssSystem out;
    out.A = Matrix::Zero(n, n);
    out.B = Matrix::Zero(n, m);
    out.C = Matrix::Zero(q, n);
    out.D = Matrix(n, 0);

    Index qrow = 0;
    for (std::size_t i = 0; i < nsub; ++i) {
        const SubsystemSpec& si = net.subsystems[i];
        const Index ni = si.sys.n();
        out.A.block(xoff[i], xoff[i], ni, ni) = si.sys.A;
        out.B.block(xoff[i], uoff[i], ni, si.sys.m()) = si.sys.B;

        // Substitute w_ij = y_ji = C_ji x_j into the drift.
        for (std::size_t k = 0; k < si.inputs.size(); ++k) {
            const InputBlock& ib = si.inputs[k];
            const Index j = net.index_of(ib.from);
            const SubsystemSpec& sj = net.subsystems[j];
            Matrix cji = sj.c_block(si.id);
            Matrix dcols = si.sys.D.middleCols(si.input_col_offset(k), ib.width);
            out.A.block(xoff[i], xoff[j], ni, sj.sys.n()) += dcols * cji;
        }

        Matrix cext = si.c_block(OutputBlock::kExternal);
        if (cext.rows() > 0) {
            out.C.block(qrow, xoff[i], cext.rows(), ni) = cext;
            qrow += cext.rows();
        }

        Matrix chan = Matrix::Zero(n, n);
        chan.block(xoff[i], xoff[i], ni, ni) = si.sys.E();
        out.diffusion.push_back(std::move(chan));

        for (const auto& jmp : si.sys.jumps) {
            Jump big;
            big.rate = jmp.rate;
            big.reset = Matrix::Zero(n, n);
            big.reset.block(xoff[i], xoff[i], ni, ni) = jmp.reset;
            out.jumps.push_back(std::move(big));
        }
    }
    out.validate();
    return out;
}

std::size_t jump_event_count(const Network& net) {
    std::size_t total = 0;
    for (const auto& s : net.subsystems) total += s.sys.jumps.size();
    return total;
}

}  // namespace jlssabs
