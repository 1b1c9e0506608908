#include "lockstep/chain.hpp"

#include <algorithm>
#include <cassert>

#include "json.hpp"

namespace lockstep {

using ordered_json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// GroupLayout

GroupLayout GroupLayout::make(int n, int t) {
    if (n <= 0 || t <= 0 || n % t != 0)
        throw PreconditionViolated("group layout needs t | n with n, t > 0");
    GroupLayout out;
    out.n = n;
    out.t = t;
    out.groups = n / t;
    out.c = Rational(t, n);
    // ct = t^2/n; the faulty slots exist only when that is a positive integer
    // and c < 1/3 (otherwise the layout is chain-only).
    long long num = (long long)t * t;
    if (num % n == 0 && num / n >= 1) {
        out.faulty_per_group = (int)(num / n);
        out.attack_capable = out.c < Rational(1, 3);
    }
    return out;
}

std::vector<ProcessorId> GroupLayout::members(int j) const {
    std::vector<ProcessorId> out;
    for (int m = 0; m < t; ++m) out.push_back((j - 1) * t + m + 1);
    return out;
}

std::vector<ProcessorId> GroupLayout::faulty(int j) const {
    std::vector<ProcessorId> out;
    for (int m = t - faulty_per_group; m < t; ++m) out.push_back((j - 1) * t + m + 1);
    return out;
}

// ---------------------------------------------------------------------------
// Z sets

ZSpec ZSpec::canonical(int E, int groups) {
    ZSpec out;
    out.E = E;
    out.groups = groups;
    out.excl.assign(E + 1, std::vector<int>(groups + 1, groups));
    return out;
}

int excluded_group(const GroupLayout& layout, const std::vector<ProcessorId>& z) {
    std::vector<int> present(layout.groups + 1, 0);
    for (ProcessorId p : z) {
        if (p < 1 || p > layout.n) throw MalformedZ("z names an unknown processor");
        present[layout.group_of(p)] += 1;
    }
    if ((int)z.size() != layout.n - layout.t)
        throw MalformedZ("z must contain exactly n - t processors");
    int excl = 0;
    for (int j = 1; j <= layout.groups; ++j) {
        if (present[j] == 0) {
            if (excl) throw MalformedZ("z misses more than one group");
            excl = j;
        } else if (present[j] != layout.t) {
            throw MalformedZ("z splits group " + std::to_string(j));
        }
    }
    if (!excl) throw MalformedZ("z misses no group");  // unreachable with the size check
    return excl;
}

static void zfamily_row(const ZSpec& z, ZFamily& zf, int i) {
    int G = z.groups;
    for (int j = 1; j <= G; ++j) {
        int excl = z.at(i, j);
        for (int g = 1; g <= G; ++g) {
            int best = zf.maxr[i - 1][j][g];
            if (g != excl && i > best) best = i;
            for (int jp = 1; jp <= G; ++jp) {
                if (jp == excl) continue;
                if (zf.maxr[i - 1][jp][g] > best) best = zf.maxr[i - 1][jp][g];
            }
            zf.maxr[i][j][g] = best;
        }
    }
}

ZFamily derive_Z(const ZSpec& z) {
    if (z.E < 1) throw HorizonTooSmall("Z family needs E >= 1");
    ZFamily zf;
    zf.E = z.E;
    zf.groups = z.groups;
    zf.maxr.assign(z.E + 1, std::vector<std::vector<int>>(
                                z.groups + 1, std::vector<int>(z.groups + 1, 0)));
    for (int i = 1; i <= z.E; ++i) {
        for (int j = 1; j <= z.groups; ++j)
            if (z.at(i, j) < 1 || z.at(i, j) > z.groups)
                throw MalformedZ("z_" + std::to_string(i) + "^" + std::to_string(j) +
                                 " is not a group complement");
        zfamily_row(z, zf, i);
    }
    return zf;
}

int ZFamily::min_round(int j, int g, int k) const {
    for (int i = 1; i <= E; ++i)
        if (maxr[i][j][g] >= k) return i;
    return 0;
}

std::vector<ProcessorId> schedule_permutation(const ZFamily& zf, const GroupLayout& layout,
                                              ProcessorId p, int round) {
    int g = layout.group_of(p);
    std::vector<std::pair<int, int>> order;  // (minimal chain round or INF, group)
    for (int j = 1; j <= layout.groups; ++j) {
        int k = zf.min_round(j, g, round);
        order.emplace_back(k == 0 ? zf.E + 1 : k, j);
    }
    std::sort(order.begin(), order.end());
    std::vector<ProcessorId> out;
    for (auto& [k, j] : order)
        for (ProcessorId m : layout.members(j)) out.push_back(m);
    return out;
}

// ---------------------------------------------------------------------------
// LockstepClass

std::map<Payload, long long> LockstepClass::s_round_part(const ZFamily& zf, int i, int j,
                                                         int k) const {
    std::map<Payload, long long> out;
    for (int g = 1; g <= zf.groups; ++g)
        if (zf.maxr[i][j][g] >= k)
            for (auto& [p, c] : counts[g][k]) out[p] += c;
    return out;
}

MessageMultiset LockstepClass::s_multiset(const ZFamily& zf, int i, int j,
                                          bool max_round_only) const {
    MessageMultiset out;
    int lo = max_round_only ? i : 1;
    for (int k = lo; k <= i; ++k)
        for (auto& [p, c] : s_round_part(zf, i, j, k)) add_message(out, k, p, (int)c);
    return out;
}

LockstepClass derive_class(const GroupLayout& layout, const ProtocolFunction& pf,
                           const std::vector<int>& inputs, const ZSpec& z,
                           const Rational& eps) {
    if ((int)inputs.size() != layout.groups + 1)
        throw PreconditionViolated("inputs must be 1-based per group");
    LockstepClass cls;
    cls.E = z.E;
    cls.inputs = inputs;
    cls.z = z;
    cls.counts.assign(layout.groups + 1,
                      std::vector<std::map<Payload, long long>>(z.E + 1));
    ZFamily zf = derive_Z(z);
    for (int k = 1; k <= z.E; ++k) {
        for (int j = 1; j <= layout.groups; ++j) {
            ChoiceDistribution d = k == 1 ? pf.init(inputs[j])
                                          : pf.next_checked(k - 1, cls.s_multiset(zf, k - 1, j,
                                                                                  false));
            cls.counts[j][k] = adjust(d, layout.t, eps).counts();
        }
    }
    return cls;
}

std::vector<GroupOutcome> class_outcomes(const GroupLayout& layout, const ProtocolFunction& pf,
                                         const LockstepClass& cls) {
    ZFamily zf = derive_Z(cls.z);
    std::vector<GroupOutcome> out(layout.groups + 1);
    for (int j = 1; j <= layout.groups; ++j) {
        for (int i = 2; i <= cls.E; ++i) {
            Decision d = pf.decide(cls.s_multiset(zf, i, j, pf.max_round_only()));
            if (d != Decision::Undecided) {
                out[j] = GroupOutcome{d, i};
                break;
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// record I/O

std::string class_to_json(const LockstepClass& cls, const ZFamily& zf) {
    ordered_json rec;
    rec["class_index"] = cls.index;
    std::vector<int> bits(cls.inputs.begin() + 1, cls.inputs.end());
    rec["inputs_per_group"] = bits;
    ordered_json zarr = ordered_json::array();
    for (int i = 1; i <= cls.E; ++i)
        for (int j = 1; j <= cls.z.groups; ++j)
            zarr.push_back(ordered_json::array({i, j, cls.z.at(i, j)}));
    rec["z"] = zarr;
    ordered_json sarr = ordered_json::array();
    for (int i = 1; i <= cls.E; ++i) {
        for (int j = 1; j <= cls.z.groups; ++j) {
            ordered_json cell = ordered_json::array();
            for (auto& [p, c] : cls.s_round_part(zf, i, j, i))
                cell.push_back(ordered_json::array({p, c}));
            sarr.push_back(ordered_json::array({i, j, cell}));
        }
    }
    rec["S"] = sarr;
    return rec.dump();
}

LockstepClass class_from_json(const std::string& line, const GroupLayout& layout,
                              const ProtocolFunction& pf, const Rational& eps) {
    ordered_json rec = ordered_json::parse(line);
    std::vector<int> bits = rec.at("inputs_per_group").get<std::vector<int>>();
    if ((int)bits.size() != layout.groups)
        throw MalformedZ("record group count does not match the layout");
    std::vector<int> inputs(layout.groups + 1, 0);
    for (int j = 1; j <= layout.groups; ++j) inputs[j] = bits[j - 1];
    int E = 0;
    for (auto& triple : rec.at("z")) E = std::max(E, triple.at(0).get<int>());
    ZSpec z = ZSpec::canonical(E, layout.groups);
    for (auto& triple : rec.at("z"))
        z.at(triple.at(0).get<int>(), triple.at(1).get<int>()) = triple.at(2).get<int>();
    LockstepClass cls = derive_class(layout, pf, inputs, z, eps);
    cls.index = rec.at("class_index").get<long long>();
    ZFamily zf = derive_Z(z);
    for (auto& cell : rec.at("S")) {
        int i = cell.at(0).get<int>(), j = cell.at(1).get<int>();
        std::map<Payload, long long> stored;
        for (auto& pc : cell.at(2)) stored[pc.at(0).get<Payload>()] = pc.at(1).get<long long>();
        if (stored != cls.s_round_part(zf, i, j, i))
            throw ReplayMismatch("stored S cell (" + std::to_string(i) + "," +
                                 std::to_string(j) + ") disagrees with rederivation");
    }
    return cls;
}

// ---------------------------------------------------------------------------
// ChainGenerator

ChainGenerator::ChainGenerator(const GroupLayout& layout, const ProtocolFunction& pf, int E,
                               const Rational& eps)
    : layout_(layout), pf_(&pf), E_(E), eps_(eps), maxRoundOnly_(pf.max_round_only()) {
    if (E < 1) throw HorizonTooSmall("chain generation needs E >= 1");
    bits_.assign(layout.groups + 1, 0);
    z_ = ZSpec::canonical(E, layout.groups);
    zf_ = derive_Z(z_);
    counts_.assign(layout.groups + 1, std::vector<std::map<Payload, long long>>(E + 1));
    totals_.assign(E + 1, {});
    cellPrefix_.assign(layout.groups + 1, std::vector<uint64_t>(E + 1, 0));
    // round-major: a cell's distribution reads the complete previous round
    for (int k = 1; k <= E; ++k)
        for (int j = 1; j <= layout.groups; ++j) recompute_cell(j, k);
    list_ = {{1, 1}};
}

ChoiceDistribution ChainGenerator::dist_for(int j, int k) const {
    if (k == 1) return pf_->init(bits_[j]);
    MessageMultiset ms;
    if (maxRoundOnly_) {
        int excl = z_.at(k - 1, j);
        for (auto& [p, c] : totals_[k - 1]) {
            long long cc = c;
            auto it = counts_[excl][k - 1].find(p);
            if (it != counts_[excl][k - 1].end()) cc -= it->second;
            if (cc > 0) add_message(ms, k - 1, p, (int)cc);
        }
    } else {
        for (int g = 1; g <= layout_.groups; ++g)
            for (int r = 1; r <= zf_.maxr[k - 1][j][g]; ++r)
                for (auto& [p, c] : counts_[g][r]) add_message(ms, r, p, (int)c);
    }
    return pf_->next_checked(k - 1, ms);
}

const std::map<Payload, long long>& ChainGenerator::adjusted_counts(
    const ChoiceDistribution& d) {
    std::string key = std::to_string(d.R());
    for (auto& [p, m] : d.mass) {
        key.push_back('|');
        key += p;
        key.push_back('\x01');
        key += std::to_string(m.num);
        key.push_back('/');
        key += std::to_string(m.den);
    }
    auto it = adjustCache_.find(key);
    if (it == adjustCache_.end())
        it = adjustCache_.emplace(key, adjust(d, layout_.t, eps_).counts()).first;
    return it->second;
}

static uint64_t cell_hash(int g, int k, const std::map<Payload, long long>& counts) {
    uint64_t h = mix_seed((uint64_t)g, (uint64_t)k);
    for (auto& [p, c] : counts) {
        for (unsigned char ch : p) h = splitmix64(h ^ ch);
        h = mix_seed(h, (uint64_t)c);
    }
    return h;
}

void ChainGenerator::recompute_cell(int j, int k) {
    const auto& fresh = adjusted_counts(dist_for(j, k));
    long long sum = 0;
    auto& total = totals_[k];
    for (auto& [p, c] : counts_[j][k]) {
        auto it = total.find(p);
        it->second -= c;
        if (it->second == 0) total.erase(it);
    }
    for (auto& [p, c] : fresh) {
        total[p] += c;
        sum += c;
    }
    if (sum != layout_.t)
        throw PropertyViolation("1", index(), k, j, "adjusted counts do not sum to t");
    counts_[j][k] = fresh;
    cellPrefix_[j][k] = cellPrefix_[j][k - 1] + cell_hash(j, k, fresh);
}

void ChainGenerator::recompute_group(int j, int from_round) {
    for (int k = from_round; k <= E_; ++k) recompute_cell(j, k);
}

void ChainGenerator::recompute_zfamily(int from_round) {
    for (int i = from_round; i <= E_; ++i) zfamily_row(z_, zf_, i);
}

uint64_t ChainGenerator::group_signature(int j) const {
    uint64_t h = splitmix64(0x5157au + (uint64_t)bits_[j]);
    for (int i = 1; i <= E_; ++i) {
        uint64_t zs = 0, ss = 0;
        for (int g = 1; g <= layout_.groups; ++g) {
            int mr = zf_.maxr[i][j][g];
            zs += splitmix64((uint64_t)g * 0x9e3779b9u + (uint64_t)mr);
            ss += cellPrefix_[g][mr];
        }
        h = mix_seed(h, (uint64_t)z_.at(i, j));
        h = mix_seed(h, zs);
        h = mix_seed(h, ss);
    }
    return h;
}

GroupOutcome ChainGenerator::outcome(int j) const {
    for (int i = 2; i <= E_; ++i) {
        MessageMultiset ms;
        if (maxRoundOnly_) {
            int excl = z_.at(i, j);
            for (auto& [p, c] : totals_[i]) {
                long long cc = c;
                auto it = counts_[excl][i].find(p);
                if (it != counts_[excl][i].end()) cc -= it->second;
                if (cc > 0) add_message(ms, i, p, (int)cc);
            }
        } else {
            ms = materialize().s_multiset(zf_, i, j, false);
        }
        Decision d = pf_->decide(ms);
        if (d != Decision::Undecided) return GroupOutcome{d, i};
    }
    return GroupOutcome{Decision::Undecided, 0};
}

LockstepClass ChainGenerator::materialize() const {
    LockstepClass cls;
    cls.index = index();
    cls.E = E_;
    cls.inputs = bits_;
    cls.z = z_;
    cls.counts = counts_;
    return cls;
}

bool ChainGenerator::advance() {
    if (!started_) {
        started_ = true;
        emitted_ = 1;
        changed_ = 0;
        return true;
    }
    if (done_) return false;
    int G = layout_.groups;
    while (true) {
        ++steps_;
        auto [gl, rl] = list_.back();
        // case 2: the earliest z row >= rl where some other group's z still
        // includes group gl
        int iStar = 0, jStar = 0;
        for (int i = rl; i <= E_ && !iStar; ++i)
            for (int j = 1; j <= G; ++j)
                if (j != gl && z_.at(i, j) != gl) {
                    iStar = i;
                    jStar = j;
                    break;
                }
        if (iStar) {
            assert(iStar + 1 > rl && iStar + 1 <= E_ + 1);
            list_.emplace_back(jStar, iStar + 1);
            continue;
        }
        // case 1
        if (list_.size() >= 2) {
            int gprev = list_[list_.size() - 2].first;
            assert(rl >= 2);
            z_.at(rl - 1, gl) = gprev;
            recompute_zfamily(rl - 1);
            recompute_group(gl, rl);
            list_.pop_back();
            changed_ = gl;
            ++emitted_;
            return true;
        }
        bits_[gl] = 1;
        recompute_group(gl, 1);
        changed_ = gl;
        ++emitted_;
        if (gl == G)
            done_ = true;
        else
            list_ = {{gl + 1, 1}};
        return true;
    }
}

std::optional<LockstepClass> ChainGenerator::next() {
    if (!advance()) return std::nullopt;
    return materialize();
}

// ---------------------------------------------------------------------------
// verify_chain

ChainReport verify_chain(const GroupLayout& layout, const ProtocolFunction& pf, int E,
                         const Rational& eps, const VerifyOptions& opts) {
    ChainGenerator gen(layout, pf, E, eps);
    ChainReport rep;
    std::vector<uint64_t> prevSig(layout.groups + 1, 0);
    std::optional<LockstepClass> c0;
    bool first = true;

    while (gen.advance()) {
        ++rep.classes;
        if (opts.class_budget && (uint64_t)rep.classes > opts.class_budget) {
            --rep.classes;
            rep.budget_exhausted = true;
            break;
        }
        std::vector<uint64_t> sig(layout.groups + 1, 0);
        for (int j = 1; j <= layout.groups; ++j) sig[j] = gen.group_signature(j);
        if (!first) {
            int diffs = 0, diffGroup = 0;
            for (int j = 1; j <= layout.groups; ++j)
                if (sig[j] != prevSig[j]) {
                    ++diffs;
                    diffGroup = j;
                }
            if (diffs != 1 || diffGroup != gen.changed_group())
                throw PropertyViolation("2", gen.index(), 0, gen.changed_group(),
                                        std::to_string(diffs) + " groups changed");
        }
        prevSig = sig;
        // independent rederivation on a sparse stride plus both endpoints
        if (first || gen.done() ||
            (opts.full_recheck_stride && gen.index() % opts.full_recheck_stride == 0)) {
            LockstepClass cls = gen.materialize();
            LockstepClass ref = derive_class(layout, pf, cls.inputs, cls.z, eps);
            for (int j = 1; j <= layout.groups; ++j)
                for (int k = 1; k <= E; ++k)
                    if (cls.counts[j][k] != ref.counts[j][k])
                        throw PropertyViolation("1", gen.index(), k, j,
                                                "incremental counts diverge from rederivation");
        }
        if (opts.find_witness && !rep.witness_index) {
            for (int j = 1; j <= layout.groups; ++j) {
                if (gen.outcome(j).decision == Decision::Undecided) {
                    rep.witness_index = gen.index();
                    rep.witness = gen.materialize();
                    break;
                }
            }
        }
        if (opts.sink) opts.sink(gen.materialize());
        if (first) c0 = gen.materialize();
        first = false;
    }
    rep.steps = gen.steps();
    if (rep.budget_exhausted) return rep;

    LockstepClass cl = gen.materialize();
    for (int j = 1; j <= layout.groups; ++j) {
        if (c0->inputs[j] != 0)
            throw PropertyViolation("endpoint", 0, 0, j, "C_0 input is not 0");
        if (cl.inputs[j] != 1)
            throw PropertyViolation("endpoint", cl.index, 0, j, "C_L input is not 1");
    }
    if (opts.replay_endpoints) {
        ReplayResult r0 = replay_class(layout, pf, *c0);
        for (ProcessorId p = 1; p <= layout.n; ++p)
            if (r0.decisions[p] == Decision::One) {
                rep.c0_decides_one = true;
                throw PropertyViolation("3", 0, 0, layout.group_of(p),
                                        "C_0 replay decided 1");
            }
        ReplayResult rl = replay_class(layout, pf, cl);
        for (ProcessorId p = 1; p <= layout.n; ++p)
            if (rl.decisions[p] == Decision::Zero) {
                rep.cl_decides_zero = true;
                throw PropertyViolation("4", cl.index, 0, layout.group_of(p),
                                        "C_L replay decided 0");
            }
    }
    return rep;
}

// ---------------------------------------------------------------------------
// replay_class

namespace {

// Coins scripted from the class: the counts of group g, round k are laid out
// in canonical payload order and dealt to members in index order.
class ClassCoins : public CoinSource {
public:
    ClassCoins(const GroupLayout& layout, const LockstepClass& cls)
        : layout_(&layout), cls_(&cls) {}

    Payload draw(ProcessorId p, int round, const ChoiceDistribution& d) override {
        if (round < 1 || round > cls_->E)
            throw ReplayMismatch("coin draw beyond the class horizon");
        const auto& counts = cls_->counts[layout_->group_of(p)][round];
        long long idx = layout_->member_index(p);
        for (auto& [payload, c] : counts) {
            if (idx < c) {
                if (!d.contains(payload))
                    throw ReplayMismatch("class assigns a payload outside the support");
                return payload;
            }
            idx -= c;
        }
        throw ReplayMismatch("class counts do not cover the group");
    }

private:
    const GroupLayout* layout_;
    const LockstepClass* cls_;
};

}  // namespace

ReplayResult replay_class(const GroupLayout& layout, const ProtocolFunction& pf,
                          const LockstepClass& cls, BroadcastKind kind) {
    ZFamily zf = derive_Z(cls.z);
    Configuration c;
    RoundProcessConfig rcfg;
    rcfg.n = layout.n;
    rcfg.t = layout.t;
    rcfg.bcast = kind;
    rcfg.val = ValidateKind::PerRound;
    rcfg.round_cap = cls.E;
    rcfg.pf = &pf;
    for (ProcessorId p = 1; p <= layout.n; ++p)
        c.add_processor(std::make_unique<RoundProcess>(rcfg, p, cls.inputs[layout.group_of(p)]));

    ClassCoins coins(layout, cls);
    ReplayResult res;
    auto apply = [&](const Event& e) {
        c.apply_event(e, &coins);
        ++res.events;
    };
    std::set<std::pair<ProcessorId, int>> plumbed;  // Bracha instances with echoes out
    auto accept_at = [&](ProcessorId q, ProcessorId p, int k) {
        if (kind == BroadcastKind::Trivial) {
            auto id = c.find_pending(q, p, p, k, MsgKind::Init);
            if (!id)
                throw ReplayMismatch("missing round " + std::to_string(k) + " message from " +
                                     std::to_string(p));
            apply(Event{q, *id, std::nullopt});
            return;
        }
        if (!plumbed.count({p, k})) {
            for (ProcessorId r = 1; r <= layout.n; ++r)
                if (auto id = c.find_pending(r, p, p, k, MsgKind::Init))
                    apply(Event{r, *id, std::nullopt});
            for (ProcessorId s = 1; s <= layout.n; ++s)
                for (ProcessorId r = 1; r <= layout.n; ++r)
                    if (auto id = c.find_pending(r, s, p, k, MsgKind::Echo))
                        apply(Event{r, *id, std::nullopt});
            plumbed.insert({p, k});
        }
        for (ProcessorId s = 1; s <= layout.n; ++s) {
            auto& rp = dynamic_cast<const RoundProcess&>(c.process(q));
            if (rp.has_accepted(p, k)) return;
            if (auto id = c.find_pending(q, s, p, k, MsgKind::Ready))
                apply(Event{q, *id, std::nullopt});
        }
        if (!dynamic_cast<const RoundProcess&>(c.process(q)).has_accepted(p, k))
            throw ReplayMismatch("broadcast acceptance did not trigger");
    };

    for (ProcessorId p = 1; p <= layout.n; ++p) apply(Event{p, std::nullopt, std::nullopt});

    for (int i = 1; i <= cls.E; ++i) {
        for (ProcessorId q = 1; q <= layout.n; ++q) {
            int j = layout.group_of(q);
            // newly covered (round, group) cells, oldest rounds first so the
            // history precedes the quorum block
            std::vector<std::pair<int, int>> cells;
            for (int g = 1; g <= layout.groups; ++g)
                for (int k = zf.maxr[i - 1][j][g] + 1; k <= zf.maxr[i][j][g]; ++k)
                    cells.emplace_back(k, g);
            std::sort(cells.begin(), cells.end());
            for (auto& [k, g] : cells)
                for (ProcessorId p : layout.members(g)) accept_at(q, p, k);
        }
        // lockstep check: everyone advanced and validated exactly Z_i^j. The
        // single-group layout has quorum 0, so everything runs to the cap at
        // the kick.
        for (ProcessorId q = 1; q <= layout.n; ++q) {
            auto& rp = dynamic_cast<const RoundProcess&>(c.process(q));
            int expectRound = (i < cls.E && layout.groups > 1) ? i + 1 : cls.E;
            if (rp.round() != expectRound || (i == cls.E && !rp.reached_cap()))
                throw ReplayMismatch("processor " + std::to_string(q) +
                                     " out of lockstep after phase " + std::to_string(i));
            int j = layout.group_of(q);
            MessageMultiset expect;
            for (int g = 1; g <= layout.groups; ++g)
                for (int k = 1; k <= zf.maxr[i][j][g]; ++k)
                    for (auto& [p, cnt] : cls.counts[g][k]) add_message(expect, k, p, (int)cnt);
            if (rp.validation().validated_multiset() != expect)
                throw ReplayMismatch("validated set of processor " + std::to_string(q) +
                                     " diverges from Z after phase " + std::to_string(i));
        }
    }

    res.decisions.assign(layout.n + 1, Decision::Undecided);
    res.decide_rounds.assign(layout.n + 1, 0);
    for (ProcessorId q = 1; q <= layout.n; ++q) {
        auto& rp = dynamic_cast<const RoundProcess&>(c.process(q));
        res.decisions[q] = rp.decision();
        res.decide_rounds[q] = rp.decide_round();
    }
    return res;
}

}  // namespace lockstep
