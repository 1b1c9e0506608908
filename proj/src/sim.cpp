#include "lockstep/sim.hpp"

#include <sstream>

namespace lockstep {

Configuration& Configuration::operator=(const Configuration& other) {
    if (this == &other) return *this;
    procs_.clear();
    procs_.reserve(other.procs_.size());
    for (auto& p : other.procs_) procs_.push_back(p->clone());
    buffer_ = other.buffer_;
    head_ = other.head_;
    alive_ = other.alive_;
    index_ = other.index_;
    return *this;
}

ProcessorId Configuration::add_processor(std::unique_ptr<Process> p) {
    procs_.push_back(std::move(p));
    return (ProcessorId)procs_.size();
}

namespace {

// Serves scripted outcomes if the event carries them, otherwise defers to the
// live source; records everything consumed. Deterministic (singleton) draws
// consume no randomness, so traces are scheduler-portable.
class EventCoins : public CoinSource {
public:
    EventCoins(const std::vector<Payload>* script, CoinSource* live)
        : script_(script), live_(live) {}

    Payload draw(ProcessorId p, int round, const ChoiceDistribution& d) override {
        if (d.mass.size() == 1) return d.mass[0].first;
        Payload out;
        if (script_) {
            if (pos_ >= script_->size())
                throw NotApplicable("replay event ran out of scripted randomness");
            out = (*script_)[pos_++];
        } else if (live_) {
            out = live_->draw(p, round, d);
        } else {
            throw NotApplicable("randomized step with no coin source");
        }
        if (!d.contains(out))
            throw NotApplicable("coin outcome outside distribution support");
        used_.push_back(out);
        return out;
    }

    std::vector<Payload> used() && { return std::move(used_); }

private:
    const std::vector<Payload>* script_;
    CoinSource* live_;
    size_t pos_ = 0;
    std::vector<Payload> used_;
};

}  // namespace

Event Configuration::apply_event(const Event& e, CoinSource* live_coins) {
    if (e.processor < 1 || e.processor > n())
        throw NotApplicable("event names an unknown processor");
    std::optional<Message> delivered;
    if (e.message_id) {
        uint64_t id = *e.message_id;
        if (id == 0 || id > buffer_.size())
            throw NotApplicable("message id was never sent");
        BufferedMessage& bm = buffer_[id - 1];
        if (!bm.alive) throw NotApplicable("message already delivered");
        if (bm.to != e.processor)
            throw NotApplicable("message not addressed to this processor");
        bm.alive = false;
        --alive_;
        index_.erase({bm.to, bm.msg.sender, bm.msg.origin, bm.msg.round, (int)bm.msg.kind});
        delivered = bm.msg;
    }

    EventCoins coins(e.randomness ? &*e.randomness : nullptr, live_coins);
    std::vector<std::pair<ProcessorId, Message>> sends;
    procs_[e.processor - 1]->step(delivered, coins, sends);

    for (auto& [to, msg] : sends) {
        if (to < 1 || to > n()) throw NotApplicable("send to unknown processor");
        Message m = msg;
        m.sender = e.processor;  // authenticity: engine stamps the sender
        if (m.origin == 0) m.origin = e.processor;
        m.id = (uint64_t)buffer_.size() + 1;
        buffer_.push_back(BufferedMessage{to, m, true});
        ++alive_;
        index_[{to, m.sender, m.origin, m.round, (int)m.kind}] = m.id;
    }

    Event done = e;
    done.randomness = std::move(coins).used();
    return done;
}

std::vector<uint64_t> Configuration::oldest_pending(size_t k) const {
    std::vector<uint64_t> out;
    size_t& head = const_cast<Configuration*>(this)->head_;
    while (head < buffer_.size() && !buffer_[head].alive) ++head;
    for (size_t i = head; i < buffer_.size() && out.size() < k; ++i)
        if (buffer_[i].alive) out.push_back(i + 1);
    return out;
}

std::optional<uint64_t> Configuration::find_pending(ProcessorId to, ProcessorId sender,
                                                    ProcessorId origin, int round,
                                                    MsgKind kind) const {
    auto it = index_.find({to, sender, origin, round, (int)kind});
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

uint64_t Configuration::state_hash() const {
    std::string blob;
    for (auto& p : procs_) {
        p->append_state(blob);
        blob.push_back('\x1f');
    }
    for (auto& bm : buffer_) {
        if (!bm.alive) continue;
        blob += std::to_string(bm.to) + "," + std::to_string(bm.msg.sender) + "," +
                std::to_string(bm.msg.origin) + "," + std::to_string(bm.msg.round) + "," +
                std::to_string((int)bm.msg.kind) + ":" + bm.msg.payload + ";";
    }
    uint64_t h = 1469598103934665603ULL;  // FNV-1a
    for (unsigned char ch : blob) {
        h ^= ch;
        h *= 1099511628211ULL;
    }
    return h;
}

std::optional<Event> BenignFairScheduler::next(const Configuration& c) {
    if (kicked_ < c.n()) {
        ++kicked_;
        return Event{kicked_, std::nullopt, std::nullopt};
    }
    auto ids = c.oldest_pending(8);
    if (ids.empty()) return std::nullopt;
    size_t pick = ids.size() == 1 ? 0 : (size_t)(rng_() % ids.size());
    uint64_t id = ids[pick];
    return Event{c.entry(id).to, id, std::nullopt};
}

RunResult run_schedule(Configuration& c, const Schedule& schedule, CoinSource* live_coins) {
    RunResult res;
    res.reason = StopReason::ConditionMet;
    for (size_t i = 0; i < schedule.size(); ++i) {
        Event done;
        try {
            done = c.apply_event(schedule[i], live_coins);
        } catch (NotApplicable& e) {
            throw NotApplicable(std::string(e.what()) + " (schedule index " +
                                    std::to_string(i) + ")",
                                i);
        }
        res.trace.push_back(TraceEntry{(uint64_t)i, done.processor, done.message_id,
                                       done.randomness.value_or(std::vector<Payload>{})});
        ++res.events;
    }
    return res;
}

RunResult run_until(Configuration& c, SchedulerPolicy& scheduler, CoinSource& coins,
                    const std::function<bool(const Configuration&)>& stop,
                    uint64_t event_cap, bool keep_trace) {
    RunResult res;
    while (!stop(c)) {
        auto ev = scheduler.next(c);
        if (!ev) {
            res.reason = StopReason::Quiescent;
            return res;
        }
        if (res.events >= event_cap)
            throw CapExceeded("event cap exceeded", std::move(res.trace));
        Event done = c.apply_event(*ev, &coins);
        if (keep_trace)
            res.trace.push_back(TraceEntry{res.events, done.processor, done.message_id,
                                           done.randomness.value_or(std::vector<Payload>{})});
        ++res.events;
    }
    res.reason = StopReason::ConditionMet;
    return res;
}

static void append_json_string(std::string& out, const std::string& s) {
    out.push_back('"');
    for (char ch : s) {
        switch (ch) {
            case '"': out += "\\\""; break;
            case '\\': out += "\\\\"; break;
            case '\n': out += "\\n"; break;
            default:
                if ((unsigned char)ch < 0x20) {
                    char buf[8];
                    snprintf(buf, sizeof buf, "\\u%04x", ch);
                    out += buf;
                } else {
                    out.push_back(ch);
                }
        }
    }
    out.push_back('"');
}

std::string trace_to_ndjson(const Trace& trace) {
    std::string out;
    for (auto& e : trace) {
        out += "{\"step_index\":" + std::to_string(e.step_index) +
               ",\"processor\":" + std::to_string(e.processor) + ",\"delivered_message_id\":";
        out += e.message_id ? std::to_string(*e.message_id) : "null";
        out += ",\"randomness_outcome\":";
        if (e.randomness.empty()) {
            out += "null";
        } else {
            out += "[";
            for (size_t i = 0; i < e.randomness.size(); ++i) {
                if (i) out += ",";
                append_json_string(out, e.randomness[i]);
            }
            out += "]";
        }
        out += "}\n";
    }
    return out;
}

Payload sample_distribution(const ChoiceDistribution& d, std::mt19937_64& rng) {
    if (d.mass.size() == 1) return d.mass[0].first;
    // exact inverse-CDF over the common denominator
    long long l = 1;
    for (auto& [s, m] : d.mass) l = std::lcm(l, m.den);
    unsigned long long total = 0;
    for (auto& [s, m] : d.mass) total += (unsigned long long)(m.num * (l / m.den));
    std::uniform_int_distribution<unsigned long long> uni(0, total - 1);
    unsigned long long x = uni(rng);
    for (auto& [s, m] : d.mass) {
        unsigned long long w = (unsigned long long)(m.num * (l / m.den));
        if (x < w) return s;
        x -= w;
    }
    return d.mass.back().first;
}

Payload SeededCoins::draw(ProcessorId p, int /*round*/, const ChoiceDistribution& d) {
    auto it = streams_.find(p);
    if (it == streams_.end())
        it = streams_.emplace(p, std::mt19937_64(mix_seed(seed_, (uint64_t)p))).first;
    return sample_distribution(d, it->second);
}

}  // namespace lockstep
