// Copyright 2026 The evomt Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "evomt/reports.hpp"

#include <cstdio>
#include <fstream>
#include <map>

#include "evomt/error.hpp"
#include "evomt/mutation.hpp"

namespace fs = std::filesystem;

namespace evomt {

namespace {

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

bool is_task_model(const SystemState& system, const ModelSpec& m) { return system.has_task(m.task); }

class CsvFile {
 public:
  CsvFile(const fs::path& path, const std::string& header) : path_(path), os_(path, std::ios::trunc) {
    if (!os_) throw Error(Errc::kIo, "cannot write " + path.string());
    os_ << header << "\n";
  }
  template <typename... Ts>
  void row(const Ts&... cols) {
    bool first = true;
    ((os_ << (first ? "" : ",") << cols, first = false), ...);
    os_ << "\n";
  }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
  std::ofstream os_;
};

}  // namespace

std::vector<HistogramBin> hparam_histogram(const SystemState& system) {
  std::vector<HistogramBin> out;
  const auto& axes = system.space().axes();
  for (std::size_t ai = 0; ai < axes.size(); ++ai) {
    std::vector<std::size_t> counts(axes[ai].size(), 0);
    for (const auto& [id, m] : system.models())
      if (is_task_model(system, m)) ++counts[m.hparams.index[ai]];
    for (std::size_t v = 0; v < counts.size(); ++v) out.push_back({axes[ai].name, axes[ai].labels[v], counts[v]});
  }
  return out;
}

std::vector<HistogramBin> mu_histogram(const SystemState& system) {
  std::map<std::string, std::vector<std::size_t>> by_family;
  for (const auto& [id, m] : system.models()) {
    if (!is_task_model(system, m)) continue;
    for (const auto& [key, step] : m.mu) {
      auto& counts = by_family[MutationAction::from_key(key).family()];
      counts.resize(MuGrid::kMaxStep + 1, 0);
      ++counts[static_cast<std::size_t>(step)];
    }
  }
  std::vector<HistogramBin> out;
  for (const auto& [family, counts] : by_family)
    for (int k = MuGrid::kMinStep; k <= MuGrid::kMaxStep; ++k)
      out.push_back({family, num(MuGrid::value(k)), counts[static_cast<std::size_t>(k)]});
  return out;
}

std::vector<DepthMean> clone_mu_by_depth(const SystemState& system) {
  std::map<int, std::pair<double, std::size_t>> acc;
  for (const auto& [id, m] : system.models()) {
    if (!is_task_model(system, m)) continue;
    for (const auto& [key, step] : m.mu) {
      const auto action = MutationAction::from_key(key);
      if (action.type != MutationType::kCloneLayer) continue;
      acc[action.depth].first += MuGrid::value(step);
      ++acc[action.depth].second;
    }
  }
  std::vector<DepthMean> out;
  for (const auto& [depth, sum] : acc)
    out.push_back({depth, sum.first / static_cast<double>(sum.second), sum.second});
  return out;
}

LineFit fit_line(const std::vector<DepthMean>& points) {
  LineFit fit;
  fit.points = points.size();
  if (points.empty()) return fit;
  double mx = 0.0, my = 0.0;
  for (const auto& p : points) {
    mx += p.depth;
    my += p.mean_mu;
  }
  mx /= static_cast<double>(points.size());
  my /= static_cast<double>(points.size());
  double sxy = 0.0, sxx = 0.0;
  for (const auto& p : points) {
    sxy += (p.depth - mx) * (p.mean_mu - my);
    sxx += (p.depth - mx) * (p.depth - mx);
  }
  fit.slope = sxx > 0.0 ? sxy / sxx : 0.0;
  fit.intercept = my - fit.slope * mx;
  return fit;
}

std::vector<fs::path> emit_reports(const RunState& run, const fs::path& out_dir) {
  fs::create_directories(out_dir);
  const SystemState& system = run.system;
  std::vector<fs::path> written;

  {
    CsvFile f(out_dir / "timeline.csv",
              "index,segment,task,mean_test_accuracy,mean_val_accuracy,mean_accounted_params,mean_flops,num_models");
    for (const auto& s : run.history)
      f.row(s.index, s.segment, s.task, num(s.mean_test_accuracy), num(s.mean_val_accuracy),
            num(s.mean_accounted_params), num(s.mean_flops), s.num_models);
    written.push_back(f.path());
  }
  {
    CsvFile f(out_dir / "task_rows.csv",
              "index,task,model,val_accuracy,test_accuracy,accounted_params,flops,hidden_depth,resolution");
    for (const auto& s : run.history)
      for (const auto& r : s.rows)
        f.row(s.index, r.task, r.model, num(r.val_accuracy), num(r.test_accuracy), num(r.accounted_params), r.flops,
              r.hidden_depth, r.resolution);
    written.push_back(f.path());
  }
  {
    CsvFile f(out_dir / "hparam_histogram.csv", "axis,value,count");
    for (const auto& b : hparam_histogram(system)) f.row(b.key, b.value, b.count);
    written.push_back(f.path());
  }
  {
    CsvFile f(out_dir / "mu_histogram.csv", "family,value,count");
    for (const auto& b : mu_histogram(system)) f.row(b.key, b.value, b.count);
    written.push_back(f.path());
  }
  const auto depth_means = clone_mu_by_depth(system);
  {
    CsvFile f(out_dir / "clone_mu_by_depth.csv", "depth,mean_mu,count");
    for (const auto& d : depth_means) f.row(d.depth, num(d.mean_mu), d.count);
    written.push_back(f.path());
  }
  {
    CsvFile f(out_dir / "clone_mu_fit.csv", "slope,intercept,points");
    const LineFit fit = fit_line(depth_means);
    f.row(num(fit.slope), num(fit.intercept), fit.points);
    written.push_back(f.path());
  }
  {
    CsvFile f(out_dir / "lineage.csv", "child,parent,task,generation,retained,quality,score,mutations,error");
    for (const auto& e : run.lineage) {
      std::string muts;
      for (const auto& k : e.mutations) muts += (muts.empty() ? "" : ";") + k;
      std::string err = e.error;
      for (char& c : err)
        if (c == ',' || c == '\n') c = ' ';
      f.row(e.child, e.parent, e.task, e.generation, e.retained ? 1 : 0, num(e.quality), num(e.score), muts, err);
    }
    written.push_back(f.path());
  }
  {
    const fs::path p = out_dir / "system.dot";
    std::ofstream os(p, std::ios::trunc);
    os << export_dot(system);
    if (!os) throw Error(Errc::kIo, "cannot write " + p.string());
    written.push_back(p);
  }
  return written;
}

}  // namespace evomt
