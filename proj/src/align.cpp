#include "align.hpp"

#include <cmath>
#include <limits>

#include "csv.hpp"

namespace drmatch {

static const double kNaN = std::numeric_limits<double>::quiet_NaN();

namespace {

double window_mean(const AlignInputs& in, const std::string& id, Month win,
                   bool* found) {
  auto it = in.pos_daily.find(id);
  if (it == in.pos_daily.end()) {
    *found = false;
    return kNaN;
  }
  double sum = 0.0;
  size_t k = 0;
  for (const auto& [date, value] : it->second)
    if (in_month(date, win)) {
      sum += value;
      ++k;
    }
  if (k == 0) {
    *found = false;
    return kNaN;
  }
  *found = true;
  return sum / static_cast<double>(k);
}

}  // namespace

CohortTable align_pretreatment(const CohortTable& t, const AlignInputs& in,
                               AlignReport* report) {
  if (t.schema.entries.empty())
    fail(Status::InvalidSpec, "align_pretreatment needs a classified schema");
  CohortTable out = t;
  AlignReport rep;

  // pass 1: treated rows get their own windows; collect per block-year
  // window month counts for the control anchor
  std::map<std::pair<std::string, int>, std::map<Month, size_t>> month_votes;
  std::vector<Month> treated_window(t.n());
  for (size_t i = 0; i < t.n(); ++i) {
    if (!t.treated[i]) continue;
    auto iv = in.interventions.find(t.ids[i]);
    if (iv == in.interventions.end())
      fail(Status::InvalidSpec,
           "treated student '" + t.ids[i] + "' has no intervention date");
    const Date& date = iv->second;

    Date snapshot{t.years[i] - 1, 12, 31};  // default: frozen at prior year end
    if (auto sn = in.snapshots.find(t.ids[i]); sn != in.snapshots.end())
      snapshot = sn->second;
    if (!(snapshot < date))
      fail(Status::LeakageDetected,
           "leakage: student '" + t.ids[i] + "' covariate snapshot " +
               format_date(snapshot) + " is not before intervention " +
               format_date(date));

    Month win = prev_month(month_of(date));
    treated_window[i] = win;
    month_votes[{t.block_key(i), t.years[i]}][win] += 1;

    bool found = false;
    double v = window_mean(in, t.ids[i], win, &found);
    if (!found)
      fail(Status::MissingPosWindow,
           "student '" + t.ids[i] + "' has no PoS observations in window " +
               std::to_string(win.y) + "-" + std::to_string(win.m));
    out.pos[i] = v;
    ++rep.n_treated_aligned;
  }

  // modal month per block-year, ties resolved to the earliest month
  std::map<std::pair<std::string, int>, Month> anchor;
  for (const auto& [key, votes] : month_votes) {
    Month best{};
    size_t best_n = 0;
    for (const auto& [mo, cnt] : votes)
      if (cnt > best_n || (cnt == best_n && mo < best)) {
        best = mo;
        best_n = cnt;
      }
    anchor[key] = best;
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%04d-%02d", best.y, best.m);
    rep.anchor_months[key.first + "|" + std::to_string(key.second)] = buf;
  }

  // pass 2: controls borrow the anchor month of their block-year
  for (size_t i = 0; i < t.n(); ++i) {
    if (t.treated[i]) continue;
    auto it = anchor.find({t.block_key(i), t.years[i]});
    if (it == anchor.end()) {
      out.pos[i] = kNaN;  // no treated rows to anchor to
      ++rep.n_controls_unanchored;
      continue;
    }
    bool found = false;
    double v = window_mean(in, t.ids[i], it->second, &found);
    if (!found)
      fail(Status::MissingPosWindow,
           "student '" + t.ids[i] + "' has no PoS observations in window " +
               std::to_string(it->second.y) + "-" +
               std::to_string(it->second.m));
    out.pos[i] = v;
    ++rep.n_controls_aligned;
  }

  if (rep.n_controls_unanchored > 0)
    rep.warnings.push_back(
        {Status::Ok, std::to_string(rep.n_controls_unanchored) +
                         " control rows sit in block-years with no treated "
                         "rows; their PoS is left missing"});

  if (report) *report = rep;
  return out;
}

AlignInputs load_align_inputs(const std::string& interventions_csv,
                              const std::string& pos_daily_csv,
                              const std::string& snapshots_csv) {
  AlignInputs in;
  if (!interventions_csv.empty()) {
    CsvTable csv = read_csv_file(interventions_csv);
    int id = csv.column("student_id");
    int date = csv.column("intervention_date");
    if (id < 0 || date < 0)
      fail(Status::MissingColumn,
           interventions_csv + ": needs student_id, intervention_date");
    for (const auto& row : csv.rows)
      in.interventions[row[id]] = parse_date(row[date], interventions_csv);
  }
  if (!pos_daily_csv.empty()) {
    CsvTable csv = read_csv_file(pos_daily_csv);
    int id = csv.column("student_id");
    int date = csv.column("date");
    int val = csv.column("pos");
    if (id < 0 || date < 0 || val < 0)
      fail(Status::MissingColumn,
           pos_daily_csv + ": needs student_id, date, pos");
    for (const auto& row : csv.rows) {
      double v;
      if (!parse_double(row[val], &v))
        fail(Status::ParseError, pos_daily_csv + ": bad pos '" + row[val] + "'");
      in.pos_daily[row[id]].emplace_back(parse_date(row[date], pos_daily_csv), v);
    }
  }
  if (!snapshots_csv.empty()) {
    CsvTable csv = read_csv_file(snapshots_csv);
    int id = csv.column("student_id");
    int date = csv.column("snapshot_date");
    if (id < 0 || date < 0)
      fail(Status::MissingColumn,
           snapshots_csv + ": needs student_id, snapshot_date");
    for (const auto& row : csv.rows)
      in.snapshots[row[id]] = parse_date(row[date], snapshots_csv);
  }
  return in;
}

}  // namespace drmatch
