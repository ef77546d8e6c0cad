// Copyright (c) 2026 The macprune Authors
// SPDX-License-Identifier: Apache-2.0

#include "macprune/reports.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace macprune {

namespace {

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, v);
  return buf;
}

std::string pad(const std::string& s, std::size_t w, bool left = true) {
  if (s.size() >= w) return s;
  return left ? s + std::string(w - s.size(), ' ') : std::string(w - s.size(), ' ') + s;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string acc_or_dash(const std::optional<double>& a) { return a ? fmt("%.2f", *a) : "-"; }

}  // namespace

OutcomeCounts count_outcomes(const std::vector<RevisionRecord>& history) {
  OutcomeCounts c;
  for (const auto& r : history) {
    switch (r.mac_status) {
      case MacStatus::kValid:
        ++c.valid;
        break;
      case MacStatus::kUndershoot:
        ++c.undershoot;
        break;
      case MacStatus::kOvershoot:
        ++c.overshoot;
        break;
    }
    if (r.status == RecordStatus::kCollapsed) ++c.collapsed;
  }
  return c;
}

std::string count_with_pct(int count, int total) {
  const double pct = total > 0 ? 100.0 * count / total : 0.0;
  return std::to_string(count) + " (" + fmt("%.0f", pct) + "%)";
}

double PhaseTiming::pct(const std::string& phase) const {
  const auto it = seconds.find(phase);
  if (it == seconds.end() || total <= 0.0) return 0.0;
  return 100.0 * it->second / total;
}

PhaseTiming total_timing(const std::vector<RevisionRecord>& history, double profiling_seconds) {
  PhaseTiming t;
  for (Phase p : kAllPhases) t.seconds[std::string(to_string(p))] = 0.0;
  t.seconds[std::string(to_string(Phase::kProfiling))] += profiling_seconds;
  for (const auto& r : history) {
    for (const auto& [k, v] : r.phase_seconds) t.seconds[k] += v;
  }
  for (const auto& [k, v] : t.seconds) t.total += v;
  return t;
}

std::string trajectory_text(const std::vector<RevisionRecord>& history) {
  std::ostringstream out;
  out << pad("Rev", 5) << pad("Achieved (G)", 14) << pad("MAC Err %", 11) << pad("Status", 12) << pad("Strategy", 50)
      << pad("Inline Acc", 11, false) << "\n";
  for (const auto& r : history) {
    out << pad(std::to_string(r.index), 5) << pad(fmt("%.4f", r.achieved_macs / 1e9), 14)
        << pad(fmt("%+.2f", r.mac_error_pct), 11) << pad(std::string(to_string(r.status)), 12)
        << pad(summarize(r.strategy), 50) << pad(acc_or_dash(r.inline_ft_acc), 11, false) << "\n";
  }
  if (history.empty()) out << "(no revisions)\n";
  return out.str();
}

std::string trajectory_csv(const std::vector<RevisionRecord>& history) {
  std::ostringstream out;
  out << "revision,achieved_macs,mac_error_pct,status,mac_status,strategy,zero_shot_acc,inline_ft_acc\n";
  for (const auto& r : history) {
    out << r.index << "," << fmt("%.0f", r.achieved_macs) << "," << fmt("%.4f", r.mac_error_pct) << ","
        << to_string(r.status) << "," << to_string(r.mac_status) << "," << csv_field(summarize(r.strategy)) << ","
        << (r.zero_shot_acc ? fmt("%.4f", *r.zero_shot_acc) : "") << ","
        << (r.inline_ft_acc ? fmt("%.4f", *r.inline_ft_acc) : "") << "\n";
  }
  return out.str();
}

std::string timing_text(const PhaseTiming& t) {
  std::ostringstream out;
  out << pad("Phase", 12) << pad("Seconds", 14, false) << pad("Share", 9, false) << "\n";
  for (Phase p : kAllPhases) {
    const std::string k(to_string(p));
    out << pad(k, 12) << pad(fmt("%.3f", t.seconds.at(k)), 14, false) << pad(fmt("%.1f%%", t.pct(k)), 9, false)
        << "\n";
  }
  out << pad("total", 12) << pad(fmt("%.3f", t.total), 14, false)
      << pad(t.total > 0.0 ? "100.0%" : "0.0%", 9, false) << "\n";
  return out.str();
}

std::string timing_csv(const PhaseTiming& t) {
  std::ostringstream out;
  out << "phase,seconds,pct\n";
  for (Phase p : kAllPhases) {
    const std::string k(to_string(p));
    out << k << "," << fmt("%.6f", t.seconds.at(k)) << "," << fmt("%.2f", t.pct(k)) << "\n";
  }
  return out.str();
}

std::string outcome_text(const OutcomeCounts& c) {
  std::ostringstream out;
  const int n = c.total();
  out << pad("Outcome", 20) << pad("Count", 12, false) << "\n";
  out << pad("Within Tolerance", 20) << pad(count_with_pct(c.valid, n), 12, false) << "\n";
  out << pad("Undershoot", 20) << pad(count_with_pct(c.undershoot, n), 12, false) << "\n";
  out << pad("Overshoot", 20) << pad(count_with_pct(c.overshoot, n), 12, false) << "\n";
  out << pad("Total", 20) << pad(std::to_string(n), 12, false) << "\n";
  out << pad("Collapsed (zero-shot)", 20) << " " << c.collapsed << "\n";
  return out.str();
}

std::string outcome_csv(const OutcomeCounts& c) {
  const int n = c.total();
  auto pct = [&](int k) { return fmt("%.2f", n > 0 ? 100.0 * k / n : 0.0); };
  std::ostringstream out;
  out << "outcome,count,pct\n";
  out << "within_tolerance," << c.valid << "," << pct(c.valid) << "\n";
  out << "undershoot," << c.undershoot << "," << pct(c.undershoot) << "\n";
  out << "overshoot," << c.overshoot << "," << pct(c.overshoot) << "\n";
  out << "total," << n << "," << (n > 0 ? "100.00" : "0.00") << "\n";
  return out.str();
}

std::string usage_text(const OracleUsage& u) {
  std::ostringstream out;
  out << "Oracle calls:     " << u.calls << "\n";
  out << "Input tokens:     " << u.input_tokens << "\n";
  out << "Output tokens:    " << u.output_tokens << "\n";
  out << "Estimated cost:   $" << fmt("%.4f", u.estimated_cost()) << " (at $" << fmt("%g", u.rate_in_per_million)
      << " / $" << fmt("%g", u.rate_out_per_million) << " per M tokens)\n";
  return out.str();
}

std::string usage_csv(const OracleUsage& u) {
  std::ostringstream out;
  out << "calls,input_tokens,output_tokens,cost_usd\n";
  out << u.calls << "," << u.input_tokens << "," << u.output_tokens << "," << fmt("%.6f", u.estimated_cost()) << "\n";
  return out.str();
}

std::map<std::string, std::string> build_reports(const ReportInputs& in) {
  const auto& h = in.state.history;
  const OutcomeCounts oc = count_outcomes(h);
  const PhaseTiming tm = total_timing(h, in.state.profiling_seconds);

  std::optional<Candidate> best;
  if (!in.state.candidates.empty()) best = select_best(in.state.candidates);
  const auto nearest = nearest_record(h);

  std::ostringstream txt;
  txt << "Target: " << format_giga(in.target_macs) << "G, band " << format_band(in.band) << ", oracle "
      << in.oracle_name << "\n";
  txt << "Revisions: " << h.size() << ", stop: "
      << (in.state.stop_reason ? std::string(to_string(*in.state.stop_reason)) : std::string("none"));
  if (in.state.aborted) txt << " (aborted: " << in.state.abort_message << ")";
  txt << "\n";
  if (best) {
    txt << "Best candidate: revision " << best->revision << ", " << fmt("%.4f", best->achieved_macs / 1e9) << "G ("
        << fmt("%+.2f", best->mac_error_pct) << "%), inline acc " << fmt("%.2f", best->accuracy) << "\n";
  } else if (nearest) {
    txt << "No valid candidate; nearest revision " << h[*nearest].index << " at "
        << fmt("%+.2f", h[*nearest].mac_error_pct) << "%\n";
  } else {
    txt << "No revisions recorded\n";
  }
  txt << "\n== Trajectory ==\n" << trajectory_text(h);
  txt << "\n== Timing ==\n" << timing_text(tm);
  txt << "\n== Outcome distribution ==\n" << outcome_text(oc);
  txt << "\n== Oracle usage ==\n" << usage_text(in.usage);

  nlohmann::ordered_json j;
  j["target_macs"] = in.target_macs;
  j["band"] = format_band(in.band);
  j["oracle"] = in.oracle_name;
  j["revisions"] = h.size();
  j["stop_reason"] =
      in.state.stop_reason ? nlohmann::ordered_json(to_string(*in.state.stop_reason)) : nlohmann::ordered_json();
  j["aborted"] = in.state.aborted;
  if (best) {
    j["best"] = {{"revision", best->revision},
                 {"achieved_macs", best->achieved_macs},
                 {"mac_error_pct", best->mac_error_pct},
                 {"accuracy", best->accuracy},
                 {"strategy", to_json(best->strategy)}};
  } else if (nearest) {
    j["nearest_revision"] = h[*nearest].index;
  }
  auto traj = nlohmann::ordered_json::array();
  for (const auto& r : h) {
    traj.push_back({{"revision", r.index},
                    {"achieved_macs", r.achieved_macs},
                    {"mac_error_pct", r.mac_error_pct},
                    {"status", to_string(r.status)},
                    {"strategy", summarize(r.strategy)},
                    {"inline_ft_acc", r.inline_ft_acc ? nlohmann::ordered_json(*r.inline_ft_acc)
                                                      : nlohmann::ordered_json()}});
  }
  j["trajectory"] = std::move(traj);
  nlohmann::ordered_json timing;
  for (Phase p : kAllPhases) {
    const std::string k(to_string(p));
    timing[k] = {{"seconds", tm.seconds.at(k)}, {"pct", tm.pct(k)}};
  }
  timing["total_seconds"] = tm.total;
  j["timing"] = std::move(timing);
  const int n = oc.total();
  j["outcomes"] = {{"within_tolerance", oc.valid},
                   {"undershoot", oc.undershoot},
                   {"overshoot", oc.overshoot},
                   {"collapsed", oc.collapsed},
                   {"total", n},
                   {"within_tolerance_text", count_with_pct(oc.valid, n)},
                   {"undershoot_text", count_with_pct(oc.undershoot, n)},
                   {"overshoot_text", count_with_pct(oc.overshoot, n)}};
  j["usage"] = to_json(in.usage);

  return {{"report.txt", txt.str()},
          {"report.json", j.dump(2) + "\n"},
          {"trajectory.csv", trajectory_csv(h)},
          {"timing.csv", timing_csv(tm)},
          {"outcomes.csv", outcome_csv(oc)},
          {"usage.csv", usage_csv(in.usage)}};
}

void write_reports(const std::map<std::string, std::string>& files, const std::string& outdir) {
  std::error_code ec;
  std::filesystem::create_directories(outdir, ec);
  if (ec) throw std::runtime_error("cannot create report directory " + outdir + ": " + ec.message());
  for (const auto& [name, text] : files) {
    const auto path = std::filesystem::path(outdir) / name;
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
    if (!out) throw std::runtime_error("write failed for " + path.string());
  }
}

}  // namespace macprune
