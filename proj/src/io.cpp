#include "jlssabs/io.hpp"

#include <nlohmann/json.hpp>

#include <cctype>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace jlssabs::io {

using nlohmann::json;

double eval_entry(const json& j, const Params& params) {
    if (j.is_number()) return j.get<double>();
    if (!j.is_string()) throw ParseError("matrix entry must be a number or string");
    std::string s = j.get<std::string>();
    // strip whitespace
    std::string t;
    for (char c : s)
        if (!std::isspace(static_cast<unsigned char>(c))) t += c;
    if (t.empty()) throw ParseError("empty matrix entry");

    double sign = 1.0;
    std::size_t pos = 0;
    if (t[pos] == '+' || t[pos] == '-') {
        sign = t[pos] == '-' ? -1.0 : 1.0;
        ++pos;
    }
    std::size_t num_end = pos;
    while (num_end < t.size() &&
           (std::isdigit(static_cast<unsigned char>(t[num_end])) || t[num_end] == '.' ||
            ((t[num_end] == 'e' || t[num_end] == 'E') && num_end + 1 < t.size() &&
             (std::isdigit(static_cast<unsigned char>(t[num_end + 1])) ||
              t[num_end + 1] == '+' || t[num_end + 1] == '-')) ||
            ((t[num_end] == '+' || t[num_end] == '-') && num_end > pos &&
             (t[num_end - 1] == 'e' || t[num_end - 1] == 'E'))))
        ++num_end;
    double coeff = 1.0;
    if (num_end > pos) coeff = std::stod(t.substr(pos, num_end - pos));
    pos = num_end;
    if (pos == t.size()) return sign * coeff;
    if (t[pos] == '*') ++pos;
    std::string name = t.substr(pos);
    auto it = params.find(name);
    if (it == params.end())
        throw ParseError("unknown parameter '" + name + "' in matrix entry '" + s + "'");
    return sign * coeff * it->second;
}

Matrix parse_matrix(const json& j, const Params& params) {
    if (!j.is_array()) throw ParseError("matrix must be an array of rows");
    const Index rows = static_cast<Index>(j.size());
    if (rows == 0) return Matrix(0, 0);
    const Index cols = static_cast<Index>(j[0].size());
    Matrix m(rows, cols);
    for (Index i = 0; i < rows; ++i) {
        if (!j[i].is_array() || static_cast<Index>(j[i].size()) != cols)
            throw ParseError("matrix rows have unequal lengths");
        for (Index c = 0; c < cols; ++c) m(i, c) = eval_entry(j[i][c], params);
    }
    return m;
}

json matrix_json(const Matrix& m) {
    json rows = json::array();
    for (Index i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (Index j2 = 0; j2 < m.cols(); ++j2) row.push_back(m(i, j2));
        rows.push_back(std::move(row));
    }
    return rows;
}

SubsystemSpec parse_subsystem(const json& j, const Params& params) {
    SubsystemSpec spec;
    spec.id = j.value("id", 1);
    spec.sys.A = parse_matrix(j.at("A"), params);
    const Index n = spec.sys.A.rows();

    // [] and absent keys mean "no columns" for B/D and "no rows" for C;
    // [[], [], ...] is an explicit n x 0 matrix.
    spec.sys.B = j.contains("B") ? parse_matrix(j.at("B"), params) : Matrix(0, 0);
    if (spec.sys.B.rows() == 0) spec.sys.B = Matrix::Zero(n, 0);
    spec.sys.C = j.contains("C") ? parse_matrix(j.at("C"), params) : Matrix(0, 0);
    if (spec.sys.C.rows() == 0) spec.sys.C = Matrix(0, n);
    spec.sys.D = j.contains("D") ? parse_matrix(j.at("D"), params) : Matrix(0, 0);
    if (spec.sys.D.rows() == 0) spec.sys.D = Matrix::Zero(n, 0);
    if (j.contains("E")) spec.sys.diffusion = {parse_matrix(j.at("E"), params)};
    else spec.sys.diffusion = {Matrix::Zero(n, n)};

    if (j.contains("jumps"))
        for (const auto& jj : j.at("jumps"))
            spec.sys.jumps.push_back(
                {jj.at("rate").get<double>(), parse_matrix(jj.at("R"), params)});

    if (j.contains("outputs")) {
        for (const auto& ob : j.at("outputs")) {
            OutputBlock blk;
            const auto& to = ob.at("to");
            blk.to = to.is_string() ? OutputBlock::kExternal : to.get<int>();
            if (to.is_string() && to.get<std::string>() != "ext")
                throw ParseError("output 'to' must be a subsystem id or \"ext\"");
            blk.rows = ob.at("rows").get<Index>();
            spec.outputs.push_back(blk);
        }
    } else if (spec.sys.q() > 0) {
        spec.outputs.push_back({OutputBlock::kExternal, spec.sys.q()});
    }
    if (j.contains("inputs"))
        for (const auto& ib : j.at("inputs"))
            spec.inputs.push_back({ib.at("from").get<int>(), ib.at("width").get<Index>()});
    spec.sys.validate();
    return spec;
}

Network parse_network_json(const json& j, const Params& params) {
    Network net;
    net.k = j.value("k", 2);
    Params merged = params;
    if (j.contains("params"))
        for (auto it = j.at("params").begin(); it != j.at("params").end(); ++it)
            if (!merged.count(it.key())) merged[it.key()] = it.value().get<double>();
    for (const auto& sj : j.at("subsystems")) net.subsystems.push_back(parse_subsystem(sj, merged));
    return net;
}

Network load_network(const std::string& path, const Params& params) {
    return parse_network_json(load_json(path), params);
}

SubsystemSpec load_subsystem(const std::string& path, const Params& params) {
    json j = load_json(path);
    if (j.contains("subsystems")) {
        Network net = parse_network_json(j, params);
        if (net.subsystems.size() != 1)
            throw ParseError("expected a single subsystem in " + path);
        return net.subsystems.front();
    }
    Params merged = params;
    if (j.contains("params"))
        for (auto it = j.at("params").begin(); it != j.at("params").end(); ++it)
            if (!merged.count(it.key())) merged[it.key()] = it.value().get<double>();
    return parse_subsystem(j, merged);
}

namespace {

json system_json(const JlssSystem& sys) {
    json j;
    j["A"] = matrix_json(sys.A);
    j["B"] = matrix_json(sys.B);
    j["C"] = matrix_json(sys.C);
    j["D"] = matrix_json(sys.D);
    j["E"] = matrix_json(sys.E());
    j["jumps"] = json::array();
    for (const auto& jmp : sys.jumps)
        j["jumps"].push_back({{"rate", jmp.rate}, {"R", matrix_json(jmp.reset)}});
    return j;
}

JlssSystem system_from_json(const json& j) {
    Params none;
    JlssSystem sys;
    sys.A = parse_matrix(j.at("A"), none);
    const Index n = sys.A.rows();
    auto fix = [n](Matrix m, bool bycols) {
        if (m.size() == 0 && m.rows() == 0) return bycols ? Matrix(0, n) : Matrix(n, 0);
        return m;
    };
    sys.B = fix(parse_matrix(j.at("B"), none), false);
    sys.C = fix(parse_matrix(j.at("C"), none), true);
    sys.D = fix(parse_matrix(j.at("D"), none), false);
    if (sys.B.cols() == 0) sys.B = Matrix::Zero(n, 0);
    if (sys.D.cols() == 0) sys.D = Matrix::Zero(n, 0);
    sys.diffusion = {parse_matrix(j.at("E"), none)};
    for (const auto& jj : j.at("jumps"))
        sys.jumps.push_back({jj.at("rate").get<double>(), parse_matrix(jj.at("R"), none)});
    sys.validate();
    return sys;
}

}  // namespace

json abstraction_json(int id, const abstraction::AbstractionResult& res) {
    json j;
    j["id"] = id;
    j["abstract"] = system_json(res.abs_sys);
    j["ssf"] = {{"M", matrix_json(res.cert.M)},       {"K", matrix_json(res.cert.K)},
                {"P", matrix_json(res.cert.P)},       {"Q", matrix_json(res.cert.Q)},
                {"S", matrix_json(res.cert.S)},       {"R_tilde", matrix_json(res.cert.R_tilde)},
                {"kappa_hat", res.cert.kappa_hat},    {"pi", res.cert.pi}};
    j["gains"] = {{"alpha", res.gains.alpha_slope},
                  {"eta", res.gains.eta_slope},
                  {"rho_ext", res.gains.rho_ext_slope},
                  {"rho_int", res.gains.rho_int_slope}};
    if (res.bp)
        j["bp"] = {{"P_hat", matrix_json(res.bp->P_hat)},
                   {"G", matrix_json(res.bp->G)},
                   {"F", matrix_json(res.bp->F)}};
    j["residuals"] = res.residuals;
    j["provenance"] = {{"mk_path", res.mk_path}};
    j["verify"] = {{"con1_margin", res.verify.margins.con1},
                   {"con11_margin", res.verify.margins.con11},
                   {"worst_slack", res.verify.worst_slack},
                   {"trials", res.verify.trials},
                   {"ok", res.verify.ok()}};
    return j;
}

abstraction::AbstractionResult parse_abstraction(const json& j, int* id) {
    abstraction::AbstractionResult res;
    if (id) *id = j.value("id", 0);
    res.abs_sys = system_from_json(j.at("abstract"));
    Params none;
    const auto& s = j.at("ssf");
    res.cert.M = parse_matrix(s.at("M"), none);
    res.cert.K = parse_matrix(s.at("K"), none);
    res.cert.P = parse_matrix(s.at("P"), none);
    res.cert.Q = parse_matrix(s.at("Q"), none);
    res.cert.S = parse_matrix(s.at("S"), none);
    res.cert.R_tilde = parse_matrix(s.at("R_tilde"), none);
    // empty matrices serialize as [] and lose their zero dimension; restore
    // the contract shapes (K: m x n, Q: m x nh, S: m x p, R~: m x mh)
    const Index n = res.cert.M.rows(), nh = res.cert.P.cols();
    auto fix = [](Matrix m, Index r, Index c) { return m.size() == 0 ? Matrix::Zero(r, c) : m; };
    res.cert.K = fix(res.cert.K, 0, n);
    const Index m = res.cert.K.rows();
    res.cert.Q = fix(res.cert.Q, m, nh);
    res.cert.S = fix(res.cert.S, m, res.abs_sys.p());
    res.cert.R_tilde = fix(res.cert.R_tilde, m, res.abs_sys.m());
    res.cert.kappa_hat = s.at("kappa_hat").get<double>();
    res.cert.pi = s.at("pi").get<double>();
    const auto& g = j.at("gains");
    res.gains = {g.at("alpha").get<double>(), g.at("eta").get<double>(),
                 g.at("rho_ext").get<double>(), g.at("rho_int").get<double>()};
    if (j.contains("bp")) {
        abstraction::BehaviorPreservingData bp;
        bp.P_hat = parse_matrix(j.at("bp").at("P_hat"), none);
        bp.G = parse_matrix(j.at("bp").at("G"), none);
        bp.F = parse_matrix(j.at("bp").at("F"), none);
        if (bp.G.size() == 0) bp.G = Matrix(n, 0);
        if (bp.F.size() == 0) bp.F = Matrix(0, n);
        res.bp = std::move(bp);
    }
    if (j.contains("residuals"))
        for (auto it = j.at("residuals").begin(); it != j.at("residuals").end(); ++it)
            res.residuals[it.key()] = it.value().get<double>();
    if (j.contains("provenance")) res.mk_path = j.at("provenance").value("mk_path", "");
    if (j.contains("verify")) {
        const auto& v = j.at("verify");
        res.verify.margins.con1 = v.at("con1_margin").get<double>();
        res.verify.margins.con11 = v.at("con11_margin").get<double>();
        res.verify.worst_slack = v.at("worst_slack").get<double>();
        res.verify.trials = v.at("trials").get<std::uint64_t>();
        res.verify.algebraic_ok = v.at("ok").get<bool>();
        res.verify.dissipation_ok = res.verify.algebraic_ok;
    }
    return res;
}

abstraction::AbstractionResult load_abstraction(const std::string& path, int* id) {
    return parse_abstraction(load_json(path), id);
}

json certificate_json(const composition::CompositionCertificate& cert,
                      const std::vector<int>& ids,
                      const std::vector<abstraction::AbstractionResult>& abstractions) {
    json j;
    j["k"] = cert.k;
    j["triangle_mode"] = cert.triangle_mode;
    j["spectral_radius"] = cert.spectral_radius;
    j["mu"] = std::vector<double>(cert.mu.data(), cert.mu.data() + cert.mu.size());
    j["Lambda"] = matrix_json(cert.Lambda);
    j["Delta"] = matrix_json(cert.Delta);
    j["slopes"] = {{"literal",
                    {{"alpha", cert.literal.alpha_slope},
                     {"eta", cert.literal.eta_slope},
                     {"rho_ext", cert.literal.rho_ext_slope}}},
                   {"paper_example_mode",
                    {{"alpha", cert.paper_example.alpha_slope},
                     {"eta", cert.paper_example.eta_slope},
                     {"rho_ext", cert.paper_example.rho_ext_slope}}}};
    j["zero_ext_ids"] = std::vector<int>(cert.zero_ext_ids.begin(), cert.zero_ext_ids.end());
    j["subsystems"] = json::array();
    for (std::size_t i = 0; i < abstractions.size(); ++i)
        j["subsystems"].push_back(abstraction_json(ids[i], abstractions[i]));
    return j;
}

LoadedCertificate load_certificate(const std::string& path) {
    json j = load_json(path);
    LoadedCertificate out;
    out.cert.k = j.at("k").get<int>();
    out.cert.triangle_mode = j.at("triangle_mode").get<bool>();
    out.cert.spectral_radius = j.at("spectral_radius").get<double>();
    std::vector<double> mu = j.at("mu").get<std::vector<double>>();
    out.cert.mu = Eigen::Map<Vector>(mu.data(), static_cast<Index>(mu.size()));
    Params none;
    out.cert.Lambda = parse_matrix(j.at("Lambda"), none);
    out.cert.Delta = parse_matrix(j.at("Delta"), none);
    const auto& lit = j.at("slopes").at("literal");
    out.cert.literal = {lit.at("alpha").get<double>(), lit.at("eta").get<double>(),
                        lit.at("rho_ext").get<double>()};
    const auto& pem = j.at("slopes").at("paper_example_mode");
    out.cert.paper_example = {pem.at("alpha").get<double>(), pem.at("eta").get<double>(),
                              pem.at("rho_ext").get<double>()};
    for (int id : j.at("zero_ext_ids").get<std::vector<int>>())
        out.cert.zero_ext_ids.insert(id);
    for (const auto& sj : j.at("subsystems")) {
        int id = 0;
        out.abstractions.push_back(parse_abstraction(sj, &id));
        out.ids.push_back(id);
        out.cert.subsystem_gains.push_back(out.abstractions.back().gains);
    }
    return out;
}

Matrix load_matrix_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open " + path);
    std::vector<std::vector<double>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
        if (!row.empty()) rows.push_back(std::move(row));
    }
    if (rows.empty()) return Matrix(0, 0);
    Matrix m(static_cast<Index>(rows.size()), static_cast<Index>(rows[0].size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() != rows[0].size())
            throw ParseError(path + ": ragged CSV rows");
        for (std::size_t j = 0; j < rows[i].size(); ++j)
            m(static_cast<Index>(i), static_cast<Index>(j)) = rows[i][j];
    }
    return m;
}

sim::PiecewiseConstant load_input_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open " + path);
    std::vector<std::vector<double>> rows;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        if (first && line.find('t') != std::string::npos &&
            line.find_first_not_of("tu_,0123456789. \r") == std::string::npos) {
            first = false;
            continue;  // header
        }
        first = false;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
        if (!row.empty()) rows.push_back(std::move(row));
    }
    sim::PiecewiseConstant sig;
    if (rows.empty()) return sig;
    const Index cols = static_cast<Index>(rows[0].size());
    sig.times = Vector(static_cast<Index>(rows.size()));
    sig.values = Matrix(static_cast<Index>(rows.size()), cols - 1);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (static_cast<Index>(rows[i].size()) != cols)
            throw ParseError(path + ": ragged CSV rows");
        sig.times(static_cast<Index>(i)) = rows[i][0];
        for (Index j = 1; j < cols; ++j)
            sig.values(static_cast<Index>(i), j - 1) = rows[i][static_cast<std::size_t>(j)];
    }
    for (Index i = 1; i < sig.times.size(); ++i)
        if (sig.times(i) <= sig.times(i - 1))
            throw ParseError(path + ": breakpoints must be strictly increasing");
    return sig;
}

void save_input_csv(const std::string& path, const sim::PiecewiseConstant& sig) {
    std::ostringstream os;
    os << "t";
    for (Index j = 0; j < sig.dim(); ++j) os << ",u_" << (j + 1);
    os << "\n";
    for (Index i = 0; i < sig.times.size(); ++i) {
        os << format_double(sig.times(i));
        for (Index j = 0; j < sig.dim(); ++j) os << "," << format_double(sig.values(i, j));
        os << "\n";
    }
    write_text_file(path, os.str());
}

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ParseError("cannot write " + path);
    out << content;
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open " + path);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

nlohmann::json load_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ParseError(path + ": " + e.what());
    }
    return j;
}

void save_json(const std::string& path, const nlohmann::json& j) {
    write_text_file(path, j.dump(2) + "\n");
}

}  // namespace jlssabs::io
