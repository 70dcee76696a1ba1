#include "titrate/csv.hpp"

#include <iomanip>

#include "titrate/config.hpp"

namespace titrate {

namespace {

// Round-trip precision for every double written.
struct FullPrecision {
  explicit FullPrecision(std::ostream& os) : os_(os), old_(os.precision(17)) {}
  ~FullPrecision() { os_.precision(old_); }
  std::ostream& os_;
  std::streamsize old_;
};

}  // namespace

void write_trace_csv(std::ostream& os, std::span<const TraceRow> trace) {
  FullPrecision guard(os);
  os << "batch_index,mean_reward,loss\n";
  for (const auto& r : trace) os << r.batch << ',' << r.mean_reward << ',' << r.loss << '\n';
}

void write_metrics_csv(std::ostream& os, std::span<const CampaignRow> rows) {
  FullPrecision guard(os);
  os << "episode_id,controller,mape,mpe,oob,induction_mg,maintenance_mg_min,total_mg,"
        "age,height,weight,sex,ke0,gamma,c50\n";
  for (const auto& r : rows) {
    const auto& m = r.metrics;
    const auto& d = r.patient.demographics;
    os << r.episode_id << ',' << r.controller << ',' << m.mape << ',' << m.mpe << ',' << m.oob_fraction << ','
       << m.induction_mass << ',' << m.maintenance_rate << ',' << m.total_mass << ',' << d.age << ',' << d.height
       << ',' << d.weight << ',' << to_string(d.sex) << ',' << r.patient.ke0 << ',' << r.patient.gamma << ','
       << r.patient.c50 << '\n';
  }
}

void write_trajectory_csv(std::ostream& os, const EpisodeLog& log, double delta_t) {
  FullPrecision guard(os);
  os << "step,t_seconds,y_star,y,y_tilde,action,x1,x2,x3,xe,o1,o2,o3,o4\n";
  for (std::size_t k = 0; k < log.steps(); ++k) {
    const auto& o = log.observation[k];
    os << k << ',' << static_cast<double>(k) * delta_t << ',' << log.target[k] << ',' << log.y[k] << ','
       << log.y_tilde[k] << ',' << log.action[k] << ',' << log.x[k][0] << ',' << log.x[k][1] << ',' << log.x[k][2]
       << ',' << log.xe[k] << ',' << o[0] << ',' << o[1] << ',' << o[2] << ',' << o[3] << '\n';
  }
}

void write_policy_map_csv(std::ostream& os, std::span<const PolicyMapRow> rows, double o4) {
  FullPrecision guard(os);
  os << "o1,o2,o3,o4,p_infuse\n";
  for (const auto& r : rows) os << r.o1 << ',' << r.o2 << ',' << r.o3 << ',' << o4 << ',' << r.p_infuse << '\n';
}

}  // namespace titrate
