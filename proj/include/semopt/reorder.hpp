#pragma once

#include "semopt/optimizer.hpp"
#include "semopt/profile_matrix.hpp"

#include <span>
#include <string>
#include <vector>

namespace semopt {

/// Widest operator set the subset DP accepts.
inline constexpr std::size_t kMaxReorderOperators = 20;

/// Selectivities of one physical stage, conditional on the tuples that reach it:
/// sel_inter is the fraction not rejected, sel_intra the fraction left unsure.
struct StageSelectivity {
    std::string operator_id;
    std::string candidate_id;
    std::size_t op = 0;
    std::size_t stage = 0;
    double sel_inter = 1.0;
    double sel_intra = 0.0;
};

struct SelectivityEstimates {
    std::vector<StageSelectivity> stages;
};

/// Replays the plan's hard decisions on the sample. A stage that receives no sample
/// tuple is reported with sel_inter 1 and sel_intra 0.
SelectivityEstimates estimate_selectivities(const OptimizedPlan& plan, const ProfileMatrix& profile);

/// Input of the ordering DP.
struct PhysicalOperator {
    std::size_t logical = 0;  // index of the logical operator this stage implements
    double cost = 0.0;        // per tuple
    double sel_inter = 1.0;
    double sel_intra = 0.0;
    /// Position within its cascade; only used when cascade order is enforced.
    std::size_t stage = 0;
};

struct ReorderOptions {
    /// Forbid running a cascade stage before the earlier stages of its cascade.
    bool respect_cascade_order = false;
};

struct ReorderResult {
    std::vector<std::size_t> order;  // indices into the operator list
    double cost = 0.0;
};

/// Expected number of tuples operator j's logical operator still has to process once
/// the operators in `done` (bitmask) ran: n times the product, in ascending index
/// order, of sel_intra for same-operator members and sel_inter for the others.
double remaining_tuples(std::span<const PhysicalOperator> ops, std::uint32_t done, std::size_t logical, double n);

/// Cost of executing the operators in the given order under the DP cost model.
double order_cost(std::span<const PhysicalOperator> ops, std::span<const std::size_t> order, double n);

/// Exact minimum-cost order by dynamic programming over operator subsets. Ties go to
/// the smaller operator index. Throws CapacityError beyond kMaxReorderOperators.
ReorderResult reorder(std::span<const PhysicalOperator> ops, double n, const ReorderOptions& options = {});

/// Flattens a plan's stages into DP inputs, in (operator, stage) order.
std::vector<PhysicalOperator> physical_operators(const OptimizedPlan& plan, const SelectivityEstimates& est);

/// Fills plan.execution_order from the DP with cascade order enforced.
void assign_execution_order(OptimizedPlan& plan, const ProfileMatrix& profile);

} // namespace semopt
