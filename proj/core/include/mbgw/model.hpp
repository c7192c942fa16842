#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace mbgw {

using Counts = std::vector<int>;

// Raised for structurally malformed input (exit code 2 at the CLI).
struct ValidationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Raised when a numerical backend cannot deliver (exit code 3 at the CLI).
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Atom {
    Counts counts;
    double p = 0.0;
};

struct OffspringLaw {
    std::vector<Atom> atoms;
    int max_total() const;
    double prob(const Counts& l) const;  // 0 outside the support
};

struct ModelSpec {
    int d = 0;
    std::vector<double> alpha;
    std::vector<OffspringLaw> offspring;
    std::vector<double> xi;   // resolved weights (Perron vector when xi_perron)
    bool xi_perron = false;

    // Structural checks only; throws ValidationError.
    void check_structure() const;
    std::string hash() const;
};

enum class Classification { subcritical, critical, supercritical };
const char* to_string(Classification c);

struct MeanMatrixData {
    Eigen::MatrixXd M;
    Eigen::MatrixXd C;
    double rho = 0.0;
    Eigen::VectorXd xi_perron;
    Classification classification = Classification::critical;
    bool reducible = false;
    std::string note;
};

enum class SavitsStatus { holds, fails, not_applicable };
const char* to_string(SavitsStatus s);

struct SavitsResult {
    SavitsStatus status = SavitsStatus::not_applicable;
    SavitsStatus integral = SavitsStatus::holds;  // verdict of the integral itself
    double value = 0.0;                           // integral over [1-delta, 1), +inf if divergent
    std::string note;
};

struct ValidationReport {
    std::vector<double> prob_sums;
    std::vector<bool> prob_sum_ok;
    bool non_simple = false;
    bool irreducible = false;
    bool finite_mean = true;
    SavitsResult savits;
    bool conservative = true;
    std::vector<std::string> warnings;
    bool hypothesis_ok() const { return non_simple && irreducible && conservative; }
};

MeanMatrixData mean_matrix(const ModelSpec& spec);
ValidationReport validate_model(const ModelSpec& spec);

// f_i(r) and its gradient.
double pgf_offspring(const ModelSpec& spec, int i, const std::vector<double>& r);
std::vector<double> pgf_offspring_grad(const ModelSpec& spec, int i, const std::vector<double>& r);

// Integral of 1/(s - Fbar(s)) over [1-delta, 1).
SavitsResult savits_integral(const std::function<double(double)>& fbar, double quad_tol,
                             double delta = 0.5);
SavitsResult savits_check(const ModelSpec& spec, double quad_tol = 1e-8);

// Strong connectivity of the directed graph i->j iff adj(i,j) > 0.
bool strongly_connected(const Eigen::MatrixXd& adj);

// Resolves xi when the Perron sentinel was given.
void resolve_xi(ModelSpec& spec);

}  // namespace mbgw
