#pragma once

#include <ostream>
#include <span>

#include "titrate/episode.hpp"
#include "titrate/eval.hpp"
#include "titrate/trainer.hpp"

namespace titrate {

// batch_index,mean_reward,loss
void write_trace_csv(std::ostream& os, std::span<const TraceRow> trace);

// episode_id,controller,mape,mpe,oob,induction_mg,maintenance_mg_min,total_mg,
// age,height,weight,sex,ke0,gamma,c50
void write_metrics_csv(std::ostream& os, std::span<const CampaignRow> rows);

// step,t_seconds,y_star,y,y_tilde,action,x1,x2,x3,xe,o1,o2,o3,o4
void write_trajectory_csv(std::ostream& os, const EpisodeLog& log, double delta_t);

// o1,o2,o3,o4,p_infuse
void write_policy_map_csv(std::ostream& os, std::span<const PolicyMapRow> rows, double o4);

}  // namespace titrate
