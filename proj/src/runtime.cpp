#include "lockstep/runtime.hpp"

#include <algorithm>

namespace lockstep {

// ---------------------------------------------------------------------------
// ValidationState

namespace {

std::string avail_signature(const std::map<Payload, int>& avail) {
    std::string sig;
    for (auto& [p, c] : avail) {
        sig += p;
        sig.push_back('\x01');
        sig += std::to_string(c);
        sig.push_back('\x02');
    }
    return sig;
}

// Enumerates count vectors c <= avail with sum(c) == need; stops early when
// visit returns true. Throws SearchBudgetExceeded when budget runs out.
bool enumerate_compositions(const std::vector<std::pair<Payload, int>>& avail, int need,
                            long long& budget, std::vector<int>& counts, size_t idx,
                            const std::function<bool(const std::vector<int>&)>& visit) {
    if (--budget < 0) throw SearchBudgetExceeded("validation subset search budget");
    if (idx == avail.size()) return need == 0 && visit(counts);
    int rest = 0;
    for (size_t i = idx + 1; i < avail.size(); ++i) rest += avail[i].second;
    int hi = std::min(avail[idx].second, need);
    int lo = std::max(0, need - rest);
    for (int c = hi; c >= lo; --c) {
        counts[idx] = c;
        if (enumerate_compositions(avail, need - c, budget, counts, idx + 1, visit))
            return true;
    }
    counts[idx] = 0;
    return false;
}

}  // namespace

void ValidationState::accept(ProcessorId sender, int round, const Payload& payload) {
    items_.push_back(Item{sender, round, payload, false});
    pending_.push_back(items_.size() - 1);
    bool changed = true;
    while (changed) {
        changed = false;
        for (size_t i = 0; i < pending_.size();) {
            if (try_mark(pending_[i])) {
                pending_.erase(pending_.begin() + (long)i);
                changed = true;
            } else {
                ++i;
            }
        }
    }
}

bool ValidationState::try_mark(size_t idx) {
    Item& it = items_[idx];
    bool ok = false;
    try {
        if (kind_ == ValidateKind::Chained) {
            try {
                ok = chained_ok(it.sender, it.round, it.payload);
            } catch (const SearchBudgetExceeded&) {
                ++chained_fallbacks_;
                ok = per_round_ok(it.round, it.payload);
            }
        } else {
            ok = per_round_ok(it.round, it.payload);
        }
    } catch (const SearchBudgetExceeded&) {
        ok = false;  // conservative: retried when more messages arrive
    }
    if (!ok) return false;
    it.valid = true;
    add_message(validated_, it.round, it.payload);
    counts_[it.round][it.payload] += 1;
    senders_[it.round].insert(it.sender);
    by_sender_[{it.sender, it.round}].push_back(it.payload);
    int& qt = quorum_total_[it.round];
    if (qt < n_ - t_) {
        ++qt;
        auto& q = quorum_[it.round];
        auto f = std::find_if(q.begin(), q.end(),
                              [&](auto& pc) { return pc.first == it.payload; });
        if (f == q.end())
            q.emplace_back(it.payload, 1);
        else
            ++f->second;
    }
    return true;
}

bool ValidationState::per_round_ok(int round, const Payload& payload) {
    if (round == 1) {
        return pf_->init(0).contains(payload) || pf_->init(1).contains(payload);
    }
    auto availIt = counts_.find(round - 1);
    if (availIt == counts_.end()) return false;
    const auto& avail = availIt->second;
    int total = 0;
    for (auto& [p, c] : avail) total += c;
    if (total < n_ - t_) return false;
    auto key = std::make_tuple(round, payload, avail_signature(avail));
    if (auto m = memo_.find(key); m != memo_.end()) return m->second;
    long long budget = kValidationBudget;
    bool found = composition_search(round, payload, avail, budget);
    memo_[key] = found;
    return found;
}

bool ValidationState::composition_search(int round, const Payload& target,
                                         const std::map<Payload, int>& avail,
                                         long long& budget) {
    std::vector<std::pair<Payload, int>> av(avail.begin(), avail.end());
    std::vector<int> counts(av.size(), 0);
    return enumerate_compositions(av, n_ - t_, budget, counts, 0,
                                  [&](const std::vector<int>& c) {
                                      MessageMultiset ms;
                                      for (size_t i = 0; i < av.size(); ++i)
                                          if (c[i]) add_message(ms, round - 1, av[i].first, c[i]);
                                      return pf_->next(round - 1, ms).contains(target);
                                  });
}

bool ValidationState::chained_ok(ProcessorId sender, int round, const Payload& payload) {
    if (round == 1)
        return pf_->init(0).contains(payload) || pf_->init(1).contains(payload);
    // the sender must have a validated message in every earlier round
    for (int i = 1; i < round; ++i) {
        auto bs = by_sender_.find({sender, i});
        if (bs == by_sender_.end() || bs->second.empty()) return false;
    }
    long long budget = kValidationBudget;
    // DFS over nested sets: per round i pick a quorum composition of the
    // validated round-i messages; acc accumulates S_i.
    MessageMultiset acc;
    std::function<bool(int)> dfs = [&](int i) -> bool {
        auto availIt = counts_.find(i);
        if (availIt == counts_.end()) return false;
        const auto& avail = availIt->second;
        int total = 0;
        for (auto& [p, c] : avail) total += c;
        if (total < n_ - t_) return false;
        std::vector<std::pair<Payload, int>> av(avail.begin(), avail.end());
        std::vector<int> counts(av.size(), 0);
        return enumerate_compositions(
            av, n_ - t_, budget, counts, 0, [&](const std::vector<int>& c) {
                for (size_t x = 0; x < av.size(); ++x)
                    if (c[x]) add_message(acc, i, av[x].first, c[x]);
                bool ok = false;
                ChoiceDistribution d = pf_->next(i, acc);
                if (i + 1 == round) {
                    ok = d.contains(payload);
                } else {
                    // sender's validated round-(i+1) candidates (deduped)
                    auto& cands = by_sender_.at({sender, i + 1});
                    std::vector<Payload> uniq(cands.begin(), cands.end());
                    std::sort(uniq.begin(), uniq.end());
                    uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
                    for (auto& m : uniq) {
                        if (d.contains(m) && dfs(i + 1)) {
                            ok = true;
                            break;
                        }
                    }
                }
                if (!ok)
                    for (size_t x = 0; x < av.size(); ++x)
                        if (c[x]) add_message(acc, i, av[x].first, -c[x]);
                return ok;
            });
    };
    return dfs(1);
}

bool ValidationState::is_validated(ProcessorId sender, int round, const Payload& payload) const {
    for (auto& it : items_)
        if (it.valid && it.sender == sender && it.round == round && it.payload == payload)
            return true;
    return false;
}

int ValidationState::validated_sender_count(int round) const {
    auto it = senders_.find(round);
    return it == senders_.end() ? 0 : (int)it->second.size();
}

std::map<Payload, int> ValidationState::quorum_counts(int round) const {
    std::map<Payload, int> out;
    if (auto it = quorum_.find(round); it != quorum_.end())
        for (auto& [p, c] : it->second) out[p] += c;
    return out;
}

std::vector<SenderMessage> ValidationState::marked() const {
    std::vector<SenderMessage> out;
    for (auto& it : items_)
        if (it.valid) out.push_back(SenderMessage{it.sender, it.round, it.payload});
    return out;
}

void ValidationState::append_state(std::string& out) const {
    for (auto& it : items_) {
        out += std::to_string(it.sender) + "." + std::to_string(it.round) + "." +
               it.payload + (it.valid ? "+" : "-") + "|";
    }
}

// ---------------------------------------------------------------------------
// RoundProcess

void RoundProcess::step(const std::optional<Message>& delivered, CoinSource& coins,
                        std::vector<std::pair<ProcessorId, Message>>& sends) {
    if (round_ == 0) start(coins, sends);
    if (delivered) on_message(*delivered, sends);
    maybe_advance(coins, sends);
}

void RoundProcess::start(CoinSource& coins,
                         std::vector<std::pair<ProcessorId, Message>>& sends) {
    ChoiceDistribution d = cfg_.pf->init(input_);
    value_ = coins.draw(self_, 1, d);
    round_ = 1;
    broadcast(1, value_, sends);
}

void RoundProcess::broadcast(int round, const Payload& v,
                             std::vector<std::pair<ProcessorId, Message>>& sends) {
    for (ProcessorId to = 1; to <= cfg_.n; ++to) {
        Message m;
        m.origin = self_;
        m.round = round;
        m.kind = MsgKind::Init;
        m.payload = v;
        sends.emplace_back(to, m);
    }
}

void RoundProcess::on_message(const Message& m,
                              std::vector<std::pair<ProcessorId, Message>>& sends) {
    if (cfg_.bcast == BroadcastKind::Trivial) {
        if (m.kind == MsgKind::Init && !accepted_.count({m.origin, m.round}))
            on_accept(m.origin, m.round, m.payload);
        return;
    }
    auto key = std::make_pair(m.origin, m.round);
    BrachaInstance& inst = bracha_[key];
    auto relay = [&](MsgKind kind, const Payload& v) {
        for (ProcessorId to = 1; to <= cfg_.n; ++to) {
            Message out;
            out.origin = m.origin;
            out.round = m.round;
            out.kind = kind;
            out.payload = v;
            sends.emplace_back(to, out);
        }
    };
    switch (m.kind) {
        case MsgKind::Init:
            if (!inst.sent_echo) {
                inst.sent_echo = true;
                relay(MsgKind::Echo, m.payload);
            }
            break;
        case MsgKind::Echo: {
            auto& set = inst.echoes[m.payload];
            set.insert(m.sender);
            if (2 * (int)set.size() > cfg_.n + cfg_.t && !inst.sent_ready) {
                inst.sent_ready = true;
                relay(MsgKind::Ready, m.payload);
            }
            break;
        }
        case MsgKind::Ready: {
            auto& set = inst.readies[m.payload];
            set.insert(m.sender);
            if ((int)set.size() >= cfg_.t + 1 && !inst.sent_ready) {
                inst.sent_ready = true;
                relay(MsgKind::Ready, m.payload);
            }
            if ((int)set.size() >= 2 * cfg_.t + 1 && !inst.accepted) {
                inst.accepted = true;
                if (!accepted_.count(key)) on_accept(m.origin, m.round, m.payload);
            }
            break;
        }
    }
}

void RoundProcess::on_accept(ProcessorId origin, int round, const Payload& payload) {
    accepted_.insert({origin, round});
    vs_.accept(origin, round, payload);
}

MessageMultiset RoundProcess::protocol_input() const {
    // S' = everything validated below the current round; S = the first n-t
    // validated current-round messages.
    MessageMultiset input;
    const MessageMultiset& all = vs_.validated_multiset();
    for (auto& [rp, cnt] : all) {
        if (rp.round < round_) input[rp] = cnt;
    }
    for (auto& [p, c] : vs_.quorum_counts(round_)) add_message(input, round_, p, c);
    return input;
}

void RoundProcess::maybe_advance(CoinSource& coins,
                                 std::vector<std::pair<ProcessorId, Message>>& sends) {
    while (!capped_ && round_ >= 1 && vs_.validated_sender_count(round_) >= cfg_.n - cfg_.t) {
        MessageMultiset input = protocol_input();
        if (round_ >= 2 && dec_ == Decision::Undecided) {
            Decision d = cfg_.pf->decide(input);
            if (d != Decision::Undecided) {
                dec_ = d;
                dec_round_ = round_;
            }
        }
        if (round_ >= cfg_.round_cap) {
            capped_ = true;
            break;
        }
        ChoiceDistribution d = cfg_.pf->next_checked(round_, input);
        value_ = coins.draw(self_, round_ + 1, d);
        ++round_;
        broadcast(round_, value_, sends);
    }
}

void RoundProcess::append_state(std::string& out) const {
    out += "p" + std::to_string(self_) + ":r" + std::to_string(round_) + ":v" + value_ +
           ":d" + std::to_string((int)dec_) + "@" + std::to_string(dec_round_) +
           (capped_ ? ":cap" : "") + ":";
    vs_.append_state(out);
}

// ---------------------------------------------------------------------------
// broadcast_schedule

Schedule broadcast_schedule(Configuration& c, ProcessorId origin, int round,
                            BroadcastKind kind, const std::vector<ProcessorId>& pi,
                            CoinSource& coins) {
    Schedule applied;
    auto deliver = [&](ProcessorId to, ProcessorId sender, MsgKind k) {
        auto id = c.find_pending(to, sender, origin, round, k);
        if (!id) return false;
        applied.push_back(c.apply_event(Event{to, *id, std::nullopt}, &coins));
        return true;
    };
    if (kind == BroadcastKind::Trivial) {
        for (ProcessorId p : pi) deliver(p, origin, MsgKind::Init);
        return applied;
    }
    // Bracha: seed everyone with init + echoes, then sequence acceptances via
    // ready deliveries (acceptance fires on the (2t+1)-th ready).
    for (ProcessorId to = 1; to <= c.n(); ++to) deliver(to, origin, MsgKind::Init);
    for (ProcessorId sender = 1; sender <= c.n(); ++sender)
        for (ProcessorId to = 1; to <= c.n(); ++to) deliver(to, sender, MsgKind::Echo);
    for (ProcessorId p : pi)
        for (ProcessorId sender = 1; sender <= c.n(); ++sender)
            deliver(p, sender, MsgKind::Ready);
    return applied;
}

// ---------------------------------------------------------------------------
// standalone policies

static std::vector<bool> run_policy(const std::vector<SenderMessage>& wplus,
                                    const ProtocolFunction& pf, int n, int t,
                                    ValidateKind kind) {
    ValidationState vs(&pf, n, t, kind);
    for (auto& m : wplus) vs.accept(m.sender, m.round, m.payload);
    std::vector<bool> out(wplus.size(), false);
    for (size_t i = 0; i < wplus.size(); ++i)
        out[i] = vs.is_validated(wplus[i].sender, wplus[i].round, wplus[i].payload);
    return out;
}

std::vector<bool> validate_per_round(const std::vector<SenderMessage>& wplus,
                                     const ProtocolFunction& pf, int n, int t) {
    return run_policy(wplus, pf, n, t, ValidateKind::PerRound);
}

std::vector<bool> validate_chained(const std::vector<SenderMessage>& wplus,
                                   const ProtocolFunction& pf, int n, int t) {
    return run_policy(wplus, pf, n, t, ValidateKind::Chained);
}

bool good_message_completeness_check(
    const std::function<std::vector<bool>(const std::vector<SenderMessage>&)>& mark,
    const ProtocolFunction& pf, int n, int t, int trials, uint64_t seed) {
    std::mt19937_64 rng(splitmix64(seed));
    for (int trial = 0; trial < trials; ++trial) {
        int targetRound = 1 + (int)(rng() % 3);
        ProcessorId p = 1 + (ProcessorId)(rng() % n);
        std::vector<SenderMessage> wplus;
        MessageMultiset acc;  // common honest view, grown round by round

        auto pick = [&](const ChoiceDistribution& d) {
            return d.mass[rng() % d.mass.size()].first;
        };

        // quorum view: n-t senders, always including p, shared by every round
        // so the history stays nested (a round-k sender has all lower rounds)
        std::vector<ProcessorId> order;
        for (ProcessorId q = 1; q <= n; ++q)
            if (q != p) order.push_back(q);
        std::shuffle(order.begin(), order.end(), rng);
        order.resize(n - t - 1);
        order.push_back(p);

        Payload target;
        for (int i = 1; i <= targetRound; ++i) {
            // everyone's round-i message (common nested views keep the
            // history honest for both validation standards)
            std::vector<Payload> msgs(n + 1);
            for (ProcessorId q = 1; q <= n; ++q) {
                ChoiceDistribution d =
                    i == 1 ? pf.init((int)(rng() % 2)) : pf.next(i - 1, acc);
                msgs[q] = pick(d);
            }
            if (i == targetRound) {
                target = msgs[p];
                wplus.push_back(SenderMessage{p, i, target});
                break;
            }
            for (ProcessorId q : order) {
                wplus.push_back(SenderMessage{q, i, msgs[q]});
                add_message(acc, i, msgs[q]);
            }
        }
        std::shuffle(wplus.begin(), wplus.end(), rng);
        size_t idx = 0;
        for (size_t i = 0; i < wplus.size(); ++i)
            if (wplus[i].sender == p && wplus[i].round == targetRound &&
                wplus[i].payload == target)
                idx = i;
        auto marks = mark(wplus);
        if (!marks[idx]) return false;
    }
    return true;
}

}  // namespace lockstep
