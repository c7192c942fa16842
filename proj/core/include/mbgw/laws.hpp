#pragma once

#include <memory>
#include <optional>
#include <utility>

#include "mbgw/combinat.hpp"
#include "mbgw/genealogy.hpp"
#include "mbgw/genfun.hpp"

namespace mbgw {

// Generating-function terms along one ray for a fixed horizon T.
// D() is w-scaled: E_m[N_u^{[j]} e^{-theta.Z_u}] / w^j.
class Terms {
public:
    virtual ~Terms() = default;
    virtual double T() const = 0;
    virtual const Ray& ray() const = 0;
    virtual double F(double u, int m) const = 0;
    virtual double D(double u, int j, int m) const = 0;
    // (r,i) -> E_r[Z_t^{(i)} prod_m F_m(T-t)^{Z_t^{(m)} - delta_{im}}]
    Eigen::MatrixXd mixed(double t) const { return mixed_between(0.0, t); }
    // (m,c) -> E_m[Z_{b-a}^{(c)} prod_j F_j(T-b)^{Z^{(j)} - delta_{cj}}]
    virtual Eigen::MatrixXd mixed_between(double a, double b) const = 0;
};

// Exact ODE solves through the engine cache.
class DirectTerms : public Terms {
public:
    DirectTerms(const GenFunEngine& eng, double T, Ray ray, int J);
    double T() const override { return T_; }
    const Ray& ray() const override { return ray_; }
    double F(double u, int m) const override;
    double D(double u, int j, int m) const override;
    Eigen::MatrixXd mixed_between(double a, double b) const override;

private:
    const GenFunEngine& eng_;
    double T_;
    Ray ray_;
    int J_;
};

// Interpolated dense tables; for Monte Carlo comparisons and simulation.
class TableTerms : public Terms {
public:
    TableTerms(const GenFunEngine& eng, double T, Ray ray, int J, int grid = 1024);
    double T() const override { return traj_.T(); }
    const Ray& ray() const override { return traj_.ray(); }
    double F(double u, int m) const override { return traj_.F(u, m); }
    double D(double u, int j, int m) const override { return traj_.D(u, j, m); }
    Eigen::MatrixXd mixed_between(double a, double b) const override { return traj_.mixed_between(a, b); }
    const Trajectory& trajectory() const { return traj_; }

private:
    Trajectory traj_;
};

struct QContext {
    const ModelSpec* spec = nullptr;
    const Terms* terms = nullptr;
    int r = 0;
    const ModelSpec& s() const { return *spec; }
    double T() const { return terms->T(); }
};

// (Q(chi_root > t), Q(c(spine_t) = i, tau_1 > t))
std::pair<double, double> q_no_split_tail(const QContext& ctx, int k, double t, int i);

// Offspring law at a birth off the spine towards type i.
double q_first_birth_offspring(const QContext& ctx, double t, int i, const Counts& l);

// Conditional density of the first root event at t being a birth off the spine
// towards type i (with offspring l when given), given c(spine_{t+}) = i, tau_1 > t.
double q_birth_off_spine_density(const QContext& ctx, int k, double t, int i, const std::optional<Counts>& l = {});
// Unconditional joint density: the conditional one times Q(c = i, tau_1 > t).
double q_birth_off_spine_joint(const QContext& ctx, int k, double t, int i, const std::optional<Counts>& l = {});
// Density of the first root event at t being a split (k >= 2).
double q_first_event_split_density(const QContext& ctx, int k, double t);

double q_first_split_density(const QContext& ctx, int k, double t, const ColouredPartition& P, const Counts& l, int i);
// Summed over all labelled partitions with the given block-size profile.
double q_first_split_profile_density(const QContext& ctx, int k, double t, const BlockSizeProfile& profile,
                                     const Counts& l, int i);

double q_joint_split_density(const QContext& ctx, const SplitRecord& rec);
// Numerator of the joint density with w-scaled moments (the denominator
// D_{k,r}(T)/w^k is left out).
double q_joint_split_numerator_scaled(const QContext& ctx, const SplitRecord& rec);
// The block part of that numerator: mixed terms of refined blocks times the
// moments of blocks left intact (singletons included), no offspring factors.
double q_joint_split_block_product(const QContext& ctx, const SplitRecord& rec);

struct QuadratureSpec {
    double rel_tol = 1e-8;
    int max_depth = 15;
};

struct DensityValue {
    double value = 0.0;
    double error = 0.0;
};

// Theorem-1 density of a split record under uniform sampling at T.
DensityValue punif_joint_split_density(const GenFunEngine& eng, double T, int r, const SplitRecord& rec,
                                       const QuadratureSpec& q = {}, double survival = -1.0);
// The same integral with the Q factor replaced by 1; equals 1 exactly in theory.
DensityValue punif_beta_mass(const GenFunEngine& eng, double T, int r, int k, const QuadratureSpec& q = {},
                             double survival = -1.0);

}  // namespace mbgw
