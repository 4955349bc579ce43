#include "safemdp/model_io.hpp"

#include "json.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace safemdp {

namespace {

using nlohmann::json;

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

json parse_json(const std::string& text) {
    json j = json::parse(text, nullptr, false);
    if (j.is_discarded()) throw std::invalid_argument("invalid JSON");
    return j;
}

} // namespace

ModelDocument parse_model(const std::string& text) {
    json j = parse_json(text);
    ModelDocument doc;
    Mdp& m = doc.mdp;
    try {
        m.n_states = j.at("n_states").get<int>();
        m.n_actions = j.at("n_actions").get<int>();
        m.discount = j.at("gamma").get<double>();
        m.r_max = j.at("r_max").get<double>();
        if (m.n_states < 1 || m.n_actions < 1)
            throw std::invalid_argument("empty state or action space");

        const auto& reward = j.at("reward");
        const auto& transition = j.at("transition");
        if (int(reward.size()) != m.n_states || int(transition.size()) != m.n_states)
            throw std::invalid_argument("reward/transition state dimension mismatch");
        m.reward.resize(std::size_t(m.n_states) * m.n_actions);
        m.transition.resize(std::size_t(m.n_states) * m.n_actions * m.n_states);
        for (int x = 0; x < m.n_states; ++x) {
            if (int(reward[x].size()) != m.n_actions ||
                int(transition[x].size()) != m.n_actions)
                throw std::invalid_argument("action dimension mismatch");
            for (int a = 0; a < m.n_actions; ++a) {
                m.r(x, a) = reward[x][a].get<double>();
                const auto& row = transition[x][a];
                if (int(row.size()) != m.n_states)
                    throw std::invalid_argument("transition row dimension mismatch");
                for (int y = 0; y < m.n_states; ++y)
                    m.row(x, a)[y] = row[y].get<double>();
            }
        }
        const auto& p0 = j.at("initial_dist");
        if (int(p0.size()) != m.n_states)
            throw std::invalid_argument("initial_dist dimension mismatch");
        m.initial_dist.resize(m.n_states);
        for (int x = 0; x < m.n_states; ++x) m.initial_dist[x] = p0[x].get<double>();

        if (j.contains("counts")) {
            CountTable c;
            c.n_states = m.n_states;
            c.n_actions = m.n_actions;
            c.counts.resize(std::size_t(m.n_states) * m.n_actions * m.n_states);
            const auto& counts = j.at("counts");
            if (int(counts.size()) != m.n_states)
                throw std::invalid_argument("counts dimension mismatch");
            for (int x = 0; x < m.n_states; ++x)
                for (int a = 0; a < m.n_actions; ++a) {
                    const auto& row = counts[x][a];
                    if (int(row.size()) != m.n_states)
                        throw std::invalid_argument("counts row dimension mismatch");
                    for (int y = 0; y < m.n_states; ++y)
                        c.counts[(std::size_t(x) * m.n_actions + a) * m.n_states + y] =
                            row[y].get<std::int64_t>();
                }
            doc.counts = std::move(c);
        }
        if (j.contains("error")) {
            ErrorFunction e;
            e.n_states = m.n_states;
            e.n_actions = m.n_actions;
            e.budget.resize(std::size_t(m.n_states) * m.n_actions);
            const auto& err = j.at("error");
            if (int(err.size()) != m.n_states)
                throw std::invalid_argument("error dimension mismatch");
            for (int x = 0; x < m.n_states; ++x) {
                if (int(err[x].size()) != m.n_actions)
                    throw std::invalid_argument("error row dimension mismatch");
                for (int a = 0; a < m.n_actions; ++a) e.at(x, a) = err[x][a].get<double>();
            }
            e.validate();
            doc.error = std::move(e);
        }
    } catch (const json::exception& ex) {
        throw std::invalid_argument(std::string("model document: ") + ex.what());
    }
    m.validate();
    return doc;
}

ModelDocument load_model(const std::string& path) { return parse_model(read_file(path)); }

std::string serialize_model(const ModelDocument& doc) {
    const Mdp& m = doc.mdp;
    json j;
    j["n_states"] = m.n_states;
    j["n_actions"] = m.n_actions;
    j["gamma"] = m.discount;
    j["r_max"] = m.r_max;
    json reward = json::array(), transition = json::array();
    for (int x = 0; x < m.n_states; ++x) {
        json rrow = json::array(), trow = json::array();
        for (int a = 0; a < m.n_actions; ++a) {
            rrow.push_back(m.r(x, a));
            json prow = json::array();
            for (int y = 0; y < m.n_states; ++y) prow.push_back(m.row(x, a)[y]);
            trow.push_back(std::move(prow));
        }
        reward.push_back(std::move(rrow));
        transition.push_back(std::move(trow));
    }
    j["reward"] = std::move(reward);
    j["transition"] = std::move(transition);
    j["initial_dist"] = m.initial_dist;
    if (doc.counts) {
        json counts = json::array();
        for (int x = 0; x < m.n_states; ++x) {
            json arow = json::array();
            for (int a = 0; a < m.n_actions; ++a) {
                json crow = json::array();
                for (int y = 0; y < m.n_states; ++y)
                    crow.push_back(
                        doc.counts->counts[(std::size_t(x) * m.n_actions + a) * m.n_states +
                                           y]);
                arow.push_back(std::move(crow));
            }
            counts.push_back(std::move(arow));
        }
        j["counts"] = std::move(counts);
    }
    if (doc.error) {
        json err = json::array();
        for (int x = 0; x < m.n_states; ++x) {
            json row = json::array();
            for (int a = 0; a < m.n_actions; ++a) row.push_back(doc.error->at(x, a));
            err.push_back(std::move(row));
        }
        j["error"] = std::move(err);
    }
    return j.dump(2);
}

void save_model(const ModelDocument& doc, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::invalid_argument("cannot open " + path);
    out << serialize_model(doc) << '\n';
}

Policy parse_policy(const std::string& text, int n_states, int n_actions) {
    json j = parse_json(text);
    try {
        if (j.contains("actions")) {
            const auto& acts = j.at("actions");
            if (int(acts.size()) != n_states)
                throw std::invalid_argument("policy actions dimension mismatch");
            std::vector<int> actions(n_states);
            for (int x = 0; x < n_states; ++x) actions[x] = acts[x].get<int>();
            return Policy::from_actions(actions, n_actions);
        }
        if (j.contains("action_dist")) {
            const auto& dist = j.at("action_dist");
            if (int(dist.size()) != n_states)
                throw std::invalid_argument("policy action_dist dimension mismatch");
            std::vector<double> flat(std::size_t(n_states) * n_actions);
            for (int x = 0; x < n_states; ++x) {
                if (int(dist[x].size()) != n_actions)
                    throw std::invalid_argument("policy row dimension mismatch");
                for (int a = 0; a < n_actions; ++a)
                    flat[std::size_t(x) * n_actions + a] = dist[x][a].get<double>();
            }
            return Policy::stochastic(n_states, n_actions, std::move(flat));
        }
    } catch (const json::exception& ex) {
        throw std::invalid_argument(std::string("policy document: ") + ex.what());
    }
    throw std::invalid_argument("policy document: need actions or action_dist");
}

Policy load_policy(const std::string& path, int n_states, int n_actions) {
    return parse_policy(read_file(path), n_states, n_actions);
}

} // namespace safemdp
