#include "regfuse/fusion.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <vector>

#include "regfuse/error.hpp"
#include "regfuse/io.hpp"
#include "regfuse/metrics.hpp"

namespace regfuse {

void validate(const FusionThresholds& th) {
    auto angle_ok = [](double d) { return std::isfinite(d) && d >= 0.0 && d <= 180.0; };
    if (!angle_ok(th.d1)) throw InvalidInput("d1 must lie in [0, 180]");
    if (!angle_ok(th.d2)) throw InvalidInput("d2 must lie in [0, 180]");
    if (!(th.d3 >= 0.0 && th.d3 <= 1.0)) throw InvalidInput("d3 must lie in [0, 1]");
    if (!std::isfinite(th.d4)) throw InvalidInput("d4 must be finite");
    if (th.tau && !(*th.tau > 0.0 && std::isfinite(*th.tau))) throw InvalidInput("tau must be positive");
}

bool rule_l1(const RigidTransform& t1, const RigidTransform& t2, double d1) {
    return error_rot_isotropic(t1.rotation(), t2.rotation().transpose()) < d1;
}

bool rule_l2(const RigidTransform& t1, double d2) { return rotation_angle_deg(t1.rotation()) < d2; }

bool rule_l3(double ol1, double d3) { return ol1 >= d3; }

bool rule_l4(double ol1, double ol3, double d4) { return ol1 + d4 > ol3; }

FusionDecision fuse(const FusionInput& in, const FusionThresholds& th) {
    if (!(in.ol1 >= 0.0 && in.ol1 <= 1.0) || !(in.ol3 >= 0.0 && in.ol3 <= 1.0)) {
        throw InvalidInput("overlaps must lie in [0, 1]");
    }
    FusionDecision d;
    d.rot_consistency_deg = error_rot_isotropic(in.t1.rotation(), in.t2.rotation().transpose());
    d.angle_r1_deg = rotation_angle_deg(in.t1.rotation());
    d.ol1 = in.ol1;
    d.ol3 = in.ol3;
    d.l1 = rule_l1(in.t1, in.t2, th.d1);
    d.l2 = rule_l2(in.t1, th.d2);
    d.l3 = rule_l3(in.ol1, th.d3);
    d.l4 = rule_l4(in.ol1, in.ol3, th.d4);
    d.chosen = fusion_predicate(d.l1, d.l2, d.l3, d.l4) ? Model::A : Model::B;
    d.transform = d.chosen == Model::A ? in.t1 : in.t3;
    return d;
}

const FusionThresholds& ThresholdTable::lookup(int category) const {
    const auto it = by_category_.find(category);
    return it == by_category_.end() ? fallback_ : it->second;
}

void ThresholdTable::set(int category, const FusionThresholds& th) {
    validate(th);
    by_category_[category] = th;
}

void ThresholdTable::set_fallback(const FusionThresholds& th) {
    validate(th);
    fallback_ = th;
}

ThresholdTable read_thresholds(std::istream& in) {
    ThresholdTable table;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::istringstream ss(line);
        std::string key;
        if (!(ss >> key) || key[0] == '#') continue;
        std::vector<double> vals;
        double v = 0.0;
        while (ss >> v) vals.push_back(v);
        if (!ss.eof() || (vals.size() != 4 && vals.size() != 5)) {
            throw FormatError("thresholds line " + std::to_string(line_no) + ": expected '<category> d1 d2 d3 d4 [tau]'");
        }
        FusionThresholds th{vals[0], vals[1], vals[2], vals[3], std::nullopt};
        if (vals.size() == 5) th.tau = vals[4];
        try {
            if (key == "default") {
                table.set_fallback(th);
            } else {
                std::size_t used = 0;
                const int cat = std::stoi(key, &used);
                if (used != key.size()) throw std::invalid_argument(key);
                table.set(cat, th);
            }
        } catch (const InvalidInput& e) {
            throw FormatError("thresholds line " + std::to_string(line_no) + ": " + e.what());
        } catch (const std::logic_error&) {
            throw FormatError("thresholds line " + std::to_string(line_no) + ": bad category '" + key + "'");
        }
    }
    return table;
}

ThresholdTable read_thresholds(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open thresholds file " + path);
    return read_thresholds(in);
}

std::string decision_csv_row(const std::string& pair_id, const FusionDecision& d) {
    std::string row = pair_id;
    for (bool b : {d.l1, d.l2, d.l3, d.l4}) row += b ? ",1" : ",0";
    row += d.chosen == Model::A ? ",A" : ",B";
    for (double v : {d.rot_consistency_deg, d.angle_r1_deg, d.ol1, d.ol3}) row += "," + io::format_csv_number(v);
    return row;
}

}  // namespace regfuse
