// Copyright 2026 the appmon authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//
// Per-window report rendering: JSON (one object per window) and CSV with
// the same columns, urls serialized as "url:count;...".

#ifndef APPMON_REPORT_HPP
#define APPMON_REPORT_HPP

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "appmon/analysis.hpp"

namespace appmon {

// URLs sorted by descending count, ties by name, cut to top_n.
inline std::vector<std::pair<std::string, uint64_t>> top_urls(const WindowAggregate& w,
                                                              size_t top_n) {
    std::vector<std::pair<std::string, uint64_t>> urls(w.url_counts.begin(), w.url_counts.end());
    std::sort(urls.begin(), urls.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    if (urls.size() > top_n) urls.resize(top_n);
    return urls;
}

inline nlohmann::json window_to_json(const WindowAggregate& w, size_t top_n) {
    nlohmann::json j{
        {"start_us", w.start_us},       {"len_us", w.length_us},
        {"count", w.count},             {"load", w.request_count},
        {"responses", w.response_count}};
    if (w.min_us) j["min_us"] = *w.min_us;
    if (w.max_us) j["max_us"] = *w.max_us;
    if (w.mean_us) j["mean_us"] = *w.mean_us;
    if (auto rate = w.success_rate()) j["success_rate"] = *rate;
    nlohmann::json urls = nlohmann::json::array();
    for (const auto& [url, count] : top_urls(w, top_n))
        urls.push_back({{"url", url}, {"count", count}});
    j["urls"] = urls;
    return j;
}

inline nlohmann::json report_to_json(const std::vector<WindowAggregate>& windows, size_t top_n) {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& w : windows) j.push_back(window_to_json(w, top_n));
    return j;
}

inline std::string report_to_csv(const std::vector<WindowAggregate>& windows, size_t top_n) {
    std::ostringstream out;
    out << "start_us,len_us,count,min_us,max_us,mean_us,load,responses,success_rate,urls\n";
    for (const auto& w : windows) {
        out << w.start_us << ',' << w.length_us << ',' << w.count << ',';
        if (w.min_us) out << *w.min_us;
        out << ',';
        if (w.max_us) out << *w.max_us;
        out << ',';
        if (w.mean_us) out << *w.mean_us;
        out << ',' << w.request_count << ',' << w.response_count << ',';
        if (auto rate = w.success_rate()) out << *rate;
        out << ',';
        bool first = true;
        for (const auto& [url, count] : top_urls(w, top_n)) {
            if (!first) out << ';';
            out << url << ':' << count;
            first = false;
        }
        out << '\n';
    }
    return out.str();
}

// Writes .json or .csv based on the path suffix.
inline void write_report(const std::string& path, const std::vector<WindowAggregate>& windows,
                         size_t top_n) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write report: " + path);
    if (path.size() >= 4 && path.compare(path.size() - 4, 4, ".csv") == 0)
        out << report_to_csv(windows, top_n);
    else
        out << report_to_json(windows, top_n).dump(2) << '\n';
}

}  // namespace appmon

#endif  // APPMON_REPORT_HPP
