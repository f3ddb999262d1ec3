#pragma once

#include <map>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "jlssabs/abstraction.hpp"
#include "jlssabs/composition.hpp"
#include "jlssabs/model.hpp"
#include "jlssabs/sim.hpp"

namespace jlssabs::io {

using Params = std::map<std::string, double>;

/// Entry expression: a number, or "[sign][coeff][*]name" with `name` bound in
/// params (e.g. "-d", "5d", "0.5", "2*d").
double eval_entry(const nlohmann::json& j, const Params& params);

/// Nested row-major arrays -> Matrix. [] is 0 x 0, [[], []] is 2 x 0.
Matrix parse_matrix(const nlohmann::json& j, const Params& params);
nlohmann::json matrix_json(const Matrix& m);

SubsystemSpec parse_subsystem(const nlohmann::json& j, const Params& params);
Network parse_network_json(const nlohmann::json& j, const Params& params);
Network load_network(const std::string& path, const Params& params);
/// Accepts either a bare subsystem object or a one-subsystem network file.
SubsystemSpec load_subsystem(const std::string& path, const Params& params);

nlohmann::json abstraction_json(int id, const abstraction::AbstractionResult& res);
abstraction::AbstractionResult parse_abstraction(const nlohmann::json& j, int* id);
abstraction::AbstractionResult load_abstraction(const std::string& path, int* id);

nlohmann::json certificate_json(const composition::CompositionCertificate& cert,
                                const std::vector<int>& ids,
                                const std::vector<abstraction::AbstractionResult>& abstractions);
struct LoadedCertificate {
    composition::CompositionCertificate cert;
    std::vector<int> ids;
    std::vector<abstraction::AbstractionResult> abstractions;
};
LoadedCertificate load_certificate(const std::string& path);

/// CSV of doubles, no header; rows of equal length.
Matrix load_matrix_csv(const std::string& path);

/// Input trajectory CSV: header "t,u_1,..,u_m", sample-and-hold rows.
sim::PiecewiseConstant load_input_csv(const std::string& path);
void save_input_csv(const std::string& path, const sim::PiecewiseConstant& sig);

/// %.17g formatting, guaranteeing lossless round-trip of doubles.
std::string format_double(double v);

void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);
nlohmann::json load_json(const std::string& path);
void save_json(const std::string& path, const nlohmann::json& j);

}  // namespace jlssabs::io
