#include "asmwb/dsl.hpp"

#include "asmwb/time_library.hpp"

#include <cctype>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

namespace asmwb {

namespace {

enum class Tok { Ident, Number, Symbol, End };

struct Token {
    Tok kind = Tok::End;
    std::string text;
    SourcePos pos;
};

const std::set<std::string, std::less<>> kKeywords = {
    "asm",    "import", "signature", "definitions", "enum",   "domain", "monitored", "controlled",
    "derived", "static", "function", "rule",        "main",   "default", "init",     "skip",
    "par",    "endpar", "if",        "then",        "else",   "endif",  "not",       "and",
    "or",     "implies", "true",     "false",
};

std::vector<Token> tokenize(std::string_view src)
{
    std::vector<Token> out;
    int line = 1;
    int col = 1;
    size_t i = 0;
    auto advance = [&](size_t n) {
        for (size_t k = 0; k < n; ++k) {
            if (src[i] == '\n') {
                ++line;
                col = 1;
            } else {
                ++col;
            }
            ++i;
        }
    };
    while (i < src.size()) {
        const char c = src[i];
        if (std::isspace(static_cast<unsigned char>(c))) {
            advance(1);
            continue;
        }
        if (c == '/' && i + 1 < src.size() && src[i + 1] == '/') {
            while (i < src.size() && src[i] != '\n') advance(1);
            continue;
        }
        Token t;
        t.pos = {line, col};
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            size_t j = i;
            while (j < src.size() && (std::isalnum(static_cast<unsigned char>(src[j])) || src[j] == '_')) ++j;
            t.kind = Tok::Ident;
            t.text = std::string(src.substr(i, j - i));
            advance(j - i);
        } else if (std::isdigit(static_cast<unsigned char>(c))) {
            size_t j = i;
            while (j < src.size() && std::isdigit(static_cast<unsigned char>(src[j]))) ++j;
            if (j + 1 < src.size() && src[j] == '.' && std::isdigit(static_cast<unsigned char>(src[j + 1]))) {
                ++j;
                while (j < src.size() && std::isdigit(static_cast<unsigned char>(src[j]))) ++j;
            }
            while (j < src.size() && std::isalpha(static_cast<unsigned char>(src[j]))) ++j;
            t.kind = Tok::Number;
            t.text = std::string(src.substr(i, j - i));
            advance(j - i);
        } else {
            static const char* two[] = {":=", "!=", "->"};
            bool matched = false;
            for (const char* s : two) {
                if (src.substr(i, 2) == s) {
                    t.kind = Tok::Symbol;
                    t.text = s;
                    advance(2);
                    matched = true;
                    break;
                }
            }
            if (!matched) {
                if (std::string_view("=()[]{}|,:;").find(c) == std::string_view::npos)
                    throw SyntaxError(line, col, "a token", std::string(1, c));
                t.kind = Tok::Symbol;
                t.text = std::string(1, c);
                advance(1);
            }
        }
        out.push_back(std::move(t));
    }
    Token end;
    end.kind = Tok::End;
    end.pos = {line, col};
    out.push_back(end);
    return out;
}

/// Duration literal: <number>(ms|s). Returns milliseconds.
std::optional<Millis> parse_duration_literal(std::string_view text)
{
    size_t unit = 0;
    while (unit < text.size() && (std::isdigit(static_cast<unsigned char>(text[unit])) || text[unit] == '.')) ++unit;
    if (unit == 0) return std::nullopt;
    const std::string number(text.substr(0, unit));
    const std::string_view suffix = text.substr(unit);
    double v = 0;
    try {
        v = std::stod(number);
    } catch (...) {
        return std::nullopt;
    }
    if (suffix == "ms") return static_cast<Millis>(v + 0.5);
    if (suffix == "s") return static_cast<Millis>(v * 1000.0 + 0.5);
    return std::nullopt;
}

struct Typed {
    std::shared_ptr<Expr> expr;
    Type type;
};

std::string pos_str(SourcePos p) { return std::to_string(p.line) + ":" + std::to_string(p.col); }

class Parser {
public:
    Parser(std::vector<Token> tokens, MachineDefinition& m) : toks_(std::move(tokens)), m_(m) {}

    void parse_model();
    Typed parse_expr();
    void expect_end()
    {
        if (peek().kind != Tok::End) fail("end of input");
    }

private:
    const Token& peek(size_t k = 0) const { return toks_[std::min(pos_ + k, toks_.size() - 1)]; }
    Token take() { return toks_[std::min(pos_++, toks_.size() - 1)]; }
    bool at_keyword(std::string_view kw) const { return peek().kind == Tok::Ident && peek().text == kw; }
    bool at_symbol(std::string_view s) const { return peek().kind == Tok::Symbol && peek().text == s; }
    [[noreturn]] void fail(const std::string& expected) const
    {
        const auto& t = peek();
        throw SyntaxError(t.pos.line, t.pos.col, expected, t.kind == Tok::End ? "end of input" : t.text);
    }
    Token expect_keyword(std::string_view kw)
    {
        if (!at_keyword(kw)) fail("'" + std::string(kw) + "'");
        return take();
    }
    Token expect_symbol(std::string_view s)
    {
        if (!at_symbol(s)) fail("'" + std::string(s) + "'");
        return take();
    }
    Token expect_ident(const std::string& what)
    {
        if (peek().kind != Tok::Ident || kKeywords.count(peek().text)) fail(what);
        return take();
    }

    void parse_signature_entry();
    void parse_definition();
    void parse_init();
    std::shared_ptr<Rule> parse_rule();
    Type parse_type(const Token& name);
    void declare_name(const std::string& name, SourcePos pos);

    Typed parse_implies();
    Typed parse_or();
    Typed parse_and();
    Typed parse_not();
    Typed parse_cmp();
    Typed parse_primary();
    void require_bool(const Typed& t, const std::string& op) const;

    std::shared_ptr<Rule> node(RuleKind k, SourcePos p)
    {
        auto r = std::make_shared<Rule>();
        r->kind = k;
        r->pos = p;
        r->id = m_.node_count++;
        return r;
    }

    std::vector<Token> toks_;
    size_t pos_ = 0;
    MachineDefinition& m_;
    std::set<std::string, std::less<>> value_names_;  // functions and literals
    std::set<std::string, std::less<>> defined_;
};

void Parser::declare_name(const std::string& name, SourcePos pos)
{
    if (!value_names_.insert(name).second)
        throw Error(ErrorCode::DuplicateDeclaration, "'" + name + "' declared twice (" + pos_str(pos) + ")");
}

void Parser::parse_model()
{
    expect_keyword("asm");
    m_.name = expect_ident("machine name").text;

    while (at_keyword("import")) {
        take();
        const Token lib = expect_ident("library name");
        if (lib.text != kTimeLibrary)
            throw Error(ErrorCode::UnknownImport, "unknown import '" + lib.text + "' at " + pos_str(lib.pos));
        if (!m_.has_time_library()) {
            m_.imports.push_back(lib.text);
            timelib::declare(m_);
            m_.clock_function = static_cast<int>(*m_.find_function(timelib::kClock));
            for (const auto& f : m_.functions) value_names_.insert(f.name);
        }
    }

    expect_keyword("signature");
    expect_symbol(":");
    while (!at_keyword("definitions")) {
        if (peek().kind == Tok::End) fail("'definitions'");
        parse_signature_entry();
    }
    take();
    expect_symbol(":");
    while (!at_keyword("default") && peek().kind != Tok::End) parse_definition();
    if (at_keyword("default")) parse_init();
    expect_end();
}

Type Parser::parse_type(const Token& name)
{
    if (name.text == "Boolean") return Type::boolean();
    if (name.text == "Timer") {
        if (!m_.has_time_library())
            throw Error(ErrorCode::UnresolvedSymbol, "domain Timer needs 'import TimeLibrary' (" + pos_str(name.pos) + ")");
        return {Type::Kind::Timer, -1};
    }
    if (auto d = m_.find_domain(name.text)) return Type::enumeration(*d);
    throw Error(ErrorCode::UnresolvedSymbol, "unknown domain '" + name.text + "' at " + pos_str(name.pos));
}

void Parser::parse_signature_entry()
{
    if (at_keyword("enum")) {
        const Token start = take();
        expect_keyword("domain");
        const Token name = expect_ident("domain name");
        if (m_.find_domain(name.text) || name.text == "Boolean" || name.text == "Timer")
            throw Error(ErrorCode::DuplicateDeclaration, "domain '" + name.text + "' declared twice");
        expect_symbol("=");
        expect_symbol("{");
        Domain d;
        d.name = name.text;
        d.pos = start.pos;
        do {
            const Token lit = expect_ident("enum literal");
            declare_name(lit.text, lit.pos);
            d.literals.push_back(lit.text);
        } while (at_symbol("|") && (take(), true));
        expect_symbol("}");
        m_.domains.push_back(std::move(d));
        return;
    }
    FunctionKind kind;
    if (at_keyword("monitored"))
        kind = FunctionKind::Monitored;
    else if (at_keyword("controlled"))
        kind = FunctionKind::Controlled;
    else if (at_keyword("derived"))
        kind = FunctionKind::Derived;
    else if (at_keyword("static"))
        kind = FunctionKind::Static;
    else
        fail("a declaration");
    const Token start = take();
    const Token name = expect_ident("function name");
    expect_symbol(":");
    const Token type_name = expect_ident("domain");
    FunctionDecl f;
    f.name = name.text;
    f.kind = kind;
    f.codomain = parse_type(type_name);
    f.module = m_.name;
    f.pos = start.pos;
    if (f.codomain.kind == Type::Kind::Timer && kind != FunctionKind::Static)
        throw Error(ErrorCode::TypeMismatch, "Timer functions must be static ('" + f.name + "')");
    declare_name(f.name, name.pos);
    m_.functions.push_back(f);
    if (f.codomain.kind == Type::Kind::Timer) {
        TimerDecl t;
        t.name = f.name;
        t.function = static_cast<int>(m_.functions.size() - 1);
        t.pos = start.pos;
        m_.timers.push_back(t);
    }
}

void Parser::parse_definition()
{
    if (at_keyword("function")) {
        const Token start = take();
        const Token name = expect_ident("function name");
        expect_symbol("=");
        auto fi = m_.find_function(name.text);
        if (!fi) throw Error(ErrorCode::UnresolvedSymbol, "definition of undeclared '" + name.text + "'");
        auto& f = m_.functions[static_cast<size_t>(*fi)];
        if (f.kind != FunctionKind::Derived && f.kind != FunctionKind::Static)
            throw Error(ErrorCode::TypeMismatch, "only derived and static functions have definitions ('" + f.name + "')");
        if (!defined_.insert(f.name).second)
            throw Error(ErrorCode::DuplicateDeclaration, "'" + f.name + "' defined twice");
        if (f.codomain.kind == Type::Kind::Timer) {
            auto& timer = m_.timers[static_cast<size_t>(*m_.find_timer(f.name))];
            const Token v = take();
            if (v.kind == Tok::Number) {
                auto ms = parse_duration_literal(v.text);
                if (!ms) throw SyntaxError(v.pos.line, v.pos.col, "a duration like 2s or 1500ms", v.text);
                timer.duration = Duration{*ms};
            } else if (v.kind == Tok::Ident && !kKeywords.count(v.text)) {
                timer.config_key = v.text;
            } else {
                throw SyntaxError(v.pos.line, v.pos.col, "a duration or configuration key", v.text);
            }
            return;
        }
        Typed t = parse_expr();
        if (!(t.type == f.codomain))
            throw Error(ErrorCode::TypeMismatch, "definition of '" + f.name + "' has type " + m_.type_name(t.type));
        if (f.kind == FunctionKind::Static && !(t.expr->kind == ExprKind::BoolConst || t.expr->ref == Expr::Ref::Literal))
            throw Error(ErrorCode::TypeMismatch, "static '" + f.name + "' must be a constant");
        (void)start;
        f.definition = t.expr;
        return;
    }
    bool is_main = false;
    if (at_keyword("main")) {
        take();
        is_main = true;
    }
    const Token start = expect_keyword("rule");
    const Token name = expect_ident("rule name");
    if (m_.find_rule(name.text))
        throw Error(ErrorCode::DuplicateDeclaration, "rule '" + name.text + "' declared twice");
    if (is_main && m_.main_rule >= 0) throw Error(ErrorCode::DuplicateDeclaration, "second main rule '" + name.text + "'");
    expect_symbol("=");
    RuleDecl decl;
    decl.name = name.text;
    decl.module = m_.name;
    decl.is_main = is_main;
    decl.pos = is_main ? SourcePos{start.pos.line, start.pos.col} : start.pos;
    m_.rules.push_back(decl);
    const size_t idx = m_.rules.size() - 1;
    if (is_main) m_.main_rule = static_cast<int>(idx);
    m_.rules[idx].body = parse_rule();
}

void Parser::parse_init()
{
    expect_keyword("default");
    expect_keyword("init");
    m_.init_name = expect_ident("initial state name").text;
    expect_symbol(":");
    while (at_keyword("function")) {
        const Token start = take();
        const Token name = expect_ident("function name");
        expect_symbol("=");
        auto fi = m_.find_function(name.text);
        if (!fi) throw Error(ErrorCode::UnresolvedSymbol, "init of undeclared '" + name.text + "'");
        const auto& f = m_.functions[static_cast<size_t>(*fi)];
        if (f.kind != FunctionKind::Controlled || f.arity != 0)
            throw Error(ErrorCode::TypeMismatch, "init of non-controlled '" + name.text + "'");
        for (const auto& e : m_.init)
            if (e.function == name.text)
                throw Error(ErrorCode::DuplicateDeclaration, "'" + name.text + "' initialized twice");
        Typed t = parse_expr();
        if (!(t.type == f.codomain))
            throw Error(ErrorCode::TypeMismatch, "initial value of '" + name.text + "' has type " + m_.type_name(t.type));
        if (!(t.expr->kind == ExprKind::BoolConst || t.expr->ref == Expr::Ref::Literal))
            throw Error(ErrorCode::TypeMismatch, "initial value of '" + name.text + "' must be a constant");
        m_.init.push_back({name.text, t.expr, {}, start.pos});
    }
}

std::shared_ptr<Rule> Parser::parse_rule()
{
    const Token& t = peek();
    if (at_keyword("skip")) {
        take();
        return node(RuleKind::Skip, t.pos);
    }
    if (at_keyword("par")) {
        auto r = node(RuleKind::Par, take().pos);
        while (!at_keyword("endpar")) {
            if (peek().kind == Tok::End) fail("'endpar'");
            r->children.push_back(parse_rule());
        }
        take();
        if (r->children.empty()) fail("a rule inside par");
        return r;
    }
    if (at_keyword("if")) {
        auto r = node(RuleKind::If, take().pos);
        Typed g = parse_expr();
        require_bool(g, "if guard");
        r->guard = g.expr;
        expect_keyword("then");
        r->then_rule = parse_rule();
        if (at_keyword("else")) {
            take();
            r->else_rule = parse_rule();
        }
        expect_keyword("endif");
        return r;
    }
    const Token name = expect_ident("a rule");
    if (at_symbol(":=")) {
        take();
        auto r = node(RuleKind::Update, name.pos);
        r->target = name.text;
        auto fi = m_.find_function(name.text);
        if (!fi)
            throw Error(ErrorCode::UnresolvedSymbol, "update of undeclared '" + name.text + "' at " + pos_str(name.pos));
        const auto& f = m_.functions[static_cast<size_t>(*fi)];
        if (f.kind != FunctionKind::Controlled || f.arity != 0)
            throw Error(ErrorCode::TypeMismatch, "'" + name.text + "' is " + function_kind_name(f.kind) +
                                                     " and cannot be updated (" + pos_str(name.pos) + ")");
        r->function = *fi;
        Typed v = parse_expr();
        if (!(v.type == f.codomain))
            throw Error(ErrorCode::TypeMismatch, "'" + name.text + "' := value of type " + m_.type_name(v.type) + " at " +
                                                     pos_str(name.pos));
        r->value = v.expr;
        return r;
    }
    if (at_symbol("[")) {
        take();
        auto r = node(RuleKind::Call, name.pos);
        r->callee = name.text;
        while (!at_symbol("]")) {
            const Token a = take();
            if (a.kind != Tok::Ident && a.kind != Tok::Number) {
                pos_--;
                fail("a call argument");
            }
            CallArg arg;
            arg.text = a.text;
            arg.pos = a.pos;
            if (a.kind == Tok::Number) {
                arg.duration = parse_duration_literal(a.text);
                if (!arg.duration) throw SyntaxError(a.pos.line, a.pos.col, "a duration like 2s or 1500ms", a.text);
            }
            r->args.push_back(arg);
            if (!at_symbol("]")) expect_symbol(",");
        }
        take();
        return r;
    }
    fail("':=' or '['");
}

void Parser::require_bool(const Typed& t, const std::string& op) const
{
    if (t.type.kind != Type::Kind::Boolean)
        throw Error(ErrorCode::TypeMismatch, op + " needs a Boolean operand at " + pos_str(t.expr->pos) + ", got " +
                                                 m_.type_name(t.type));
}

Typed Parser::parse_expr() { return parse_implies(); }

Typed Parser::parse_implies()
{
    Typed lhs = parse_or();
    if (at_keyword("implies")) {
        const Token op = take();
        Typed rhs = parse_implies();
        require_bool(lhs, "implies");
        require_bool(rhs, "implies");
        auto e = std::make_shared<Expr>();
        e->kind = ExprKind::Implies;
        e->pos = op.pos;
        e->operands = {lhs.expr, rhs.expr};
        return {e, Type::boolean()};
    }
    return lhs;
}

Typed Parser::parse_or()
{
    Typed lhs = parse_and();
    while (at_keyword("or")) {
        const Token op = take();
        Typed rhs = parse_and();
        require_bool(lhs, "or");
        require_bool(rhs, "or");
        auto e = std::make_shared<Expr>();
        e->kind = ExprKind::Or;
        e->pos = op.pos;
        e->operands = {lhs.expr, rhs.expr};
        lhs = {e, Type::boolean()};
    }
    return lhs;
}

Typed Parser::parse_and()
{
    Typed lhs = parse_not();
    while (at_keyword("and")) {
        const Token op = take();
        Typed rhs = parse_not();
        require_bool(lhs, "and");
        require_bool(rhs, "and");
        auto e = std::make_shared<Expr>();
        e->kind = ExprKind::And;
        e->pos = op.pos;
        e->operands = {lhs.expr, rhs.expr};
        lhs = {e, Type::boolean()};
    }
    return lhs;
}

Typed Parser::parse_not()
{
    if (at_keyword("not")) {
        const Token op = take();
        Typed inner = parse_not();
        require_bool(inner, "not");
        auto e = std::make_shared<Expr>();
        e->kind = ExprKind::Not;
        e->pos = op.pos;
        e->operands = {inner.expr};
        return {e, Type::boolean()};
    }
    return parse_cmp();
}

Typed Parser::parse_cmp()
{
    Typed lhs = parse_primary();
    if (at_symbol("=") || at_symbol("!=")) {
        const Token op = take();
        Typed rhs = parse_primary();
        if (!(lhs.type == rhs.type) || (lhs.type.kind != Type::Kind::Boolean && lhs.type.kind != Type::Kind::Enum))
            throw Error(ErrorCode::TypeMismatch, "cannot compare " + m_.type_name(lhs.type) + " with " +
                                                     m_.type_name(rhs.type) + " at " + pos_str(op.pos));
        auto e = std::make_shared<Expr>();
        e->kind = op.text == "=" ? ExprKind::Eq : ExprKind::Neq;
        e->pos = op.pos;
        e->operands = {lhs.expr, rhs.expr};
        return {e, Type::boolean()};
    }
    return lhs;
}

Typed Parser::parse_primary()
{
    const Token t = peek();
    if (at_symbol("(")) {
        take();
        Typed inner = parse_expr();
        expect_symbol(")");
        return inner;
    }
    if (at_keyword("true") || at_keyword("false")) {
        take();
        auto e = std::make_shared<Expr>();
        e->kind = ExprKind::BoolConst;
        e->bool_value = t.text == "true";
        e->pos = t.pos;
        return {e, Type::boolean()};
    }
    const Token name = expect_ident("an expression");
    auto e = std::make_shared<Expr>();
    e->pos = name.pos;
    e->name = name.text;
    if (at_symbol("(")) {
        take();
        const Token arg = expect_ident("a timer");
        expect_symbol(")");
        if (name.text != "expired" && name.text != "elapsed")
            throw Error(ErrorCode::UnresolvedSymbol, "unknown function '" + name.text + "(...)' at " + pos_str(name.pos));
        if (!m_.has_time_library())
            throw Error(ErrorCode::UnresolvedSymbol, "'" + name.text + "' needs 'import TimeLibrary' (" + pos_str(name.pos) + ")");
        if (name.text == "elapsed")
            throw Error(ErrorCode::TypeMismatch, "duration-valued 'elapsed' cannot be used in guards (" + pos_str(name.pos) + ")");
        auto timer = m_.find_timer(arg.text);
        if (!timer) throw Error(ErrorCode::UnresolvedSymbol, "unknown timer '" + arg.text + "' at " + pos_str(arg.pos));
        e->kind = ExprKind::Expired;
        e->name = arg.text;
        e->ref = Expr::Ref::Timer;
        e->index = *timer;
        return {e, Type::boolean()};
    }
    e->kind = ExprKind::Ident;
    if (auto fi = m_.find_function(name.text)) {
        const auto& f = m_.functions[static_cast<size_t>(*fi)];
        if (f.arity != 0 || f.codomain.kind == Type::Kind::Timer || f.codomain.kind == Type::Kind::Instant ||
            f.codomain.kind == Type::Kind::Duration)
            throw Error(ErrorCode::TypeMismatch, "'" + f.name + "' cannot be used as a value at " + pos_str(name.pos));
        e->ref = Expr::Ref::Function;
        e->index = *fi;
        return {e, f.codomain};
    }
    if (auto lit = m_.find_literal(name.text)) {
        e->ref = Expr::Ref::Literal;
        e->literal = *lit;
        return {e, Type::enumeration(lit->domain())};
    }
    throw Error(ErrorCode::UnresolvedSymbol, "unknown identifier '" + name.text + "' at " + pos_str(name.pos));
}

// Post-parse resolution of rule calls and cycle checks.
void resolve_calls(MachineDefinition& m)
{
    std::function<void(const Rule&)> walk = [&](const Rule& r) {
        switch (r.kind) {
        case RuleKind::Par:
            for (const auto& c : r.children) walk(*c);
            break;
        case RuleKind::If:
            walk(*r.then_rule);
            if (r.else_rule) walk(*r.else_rule);
            break;
        case RuleKind::Call: {
            auto& call = const_cast<Rule&>(r);
            auto ri = m.find_rule(call.callee);
            if (!ri)
                throw Error(ErrorCode::UnresolvedSymbol, "call of undeclared rule '" + call.callee + "' at " + pos_str(call.pos));
            call.rule = *ri;
            const auto& decl = m.rules[static_cast<size_t>(*ri)];
            if (decl.is_main) throw Error(ErrorCode::UnsupportedConstruct, "main rule called at " + pos_str(call.pos));
            if (decl.library == LibraryRule::None) {
                if (!call.args.empty())
                    throw Error(ErrorCode::TypeMismatch, "rule '" + call.callee + "' takes no arguments (" + pos_str(call.pos) + ")");
                break;
            }
            const size_t want = decl.library == LibraryRule::ResetTimer ? 1 : 2;
            if (call.args.size() != want)
                throw Error(ErrorCode::TypeMismatch, "'" + call.callee + "' takes " + std::to_string(want) + " argument(s) at " +
                                                         pos_str(call.pos));
            auto timer = m.find_timer(call.args[0].text);
            if (!timer)
                throw Error(ErrorCode::UnresolvedSymbol, "unknown timer '" + call.args[0].text + "' at " + pos_str(call.args[0].pos));
            call.arg_timers = {*timer};
            if (want == 2) {
                if (!call.args[1].duration)
                    throw Error(ErrorCode::TypeMismatch, "r_set_duration needs a duration literal at " + pos_str(call.args[1].pos));
                call.arg_duration = call.args[1].duration;
            }
            break;
        }
        default: break;
        }
    };
    for (const auto& r : m.rules)
        if (r.body) walk(*r.body);

    // Macro recursion.
    std::vector<int> color(m.rules.size(), 0);
    std::function<void(int)> visit;
    std::function<void(const Rule&, int)> calls = [&](const Rule& r, int from) {
        if (r.kind == RuleKind::Call && r.rule >= 0) visit(r.rule);
        for (const auto& c : r.children) calls(*c, from);
        if (r.then_rule) calls(*r.then_rule, from);
        if (r.else_rule) calls(*r.else_rule, from);
    };
    visit = [&](int i) {
        auto& c = color[static_cast<size_t>(i)];
        if (c == 1)
            throw Error(ErrorCode::UnsupportedConstruct, "recursive macro '" + m.rules[static_cast<size_t>(i)].name + "'");
        if (c == 2) return;
        c = 1;
        if (m.rules[static_cast<size_t>(i)].body) calls(*m.rules[static_cast<size_t>(i)].body, i);
        c = 2;
    };
    for (size_t i = 0; i < m.rules.size(); ++i) visit(static_cast<int>(i));

    // Derived definitions must be acyclic.
    std::vector<int> fcolor(m.functions.size(), 0);
    std::function<void(int)> fvisit;
    std::function<void(const Expr&)> reads = [&](const Expr& e) {
        if (e.kind == ExprKind::Ident && e.ref == Expr::Ref::Function) fvisit(e.index);
        for (const auto& o : e.operands) reads(*o);
    };
    fvisit = [&](int i) {
        auto& c = fcolor[static_cast<size_t>(i)];
        if (c == 1)
            throw Error(ErrorCode::UnsupportedConstruct, "cyclic definition of '" + m.functions[static_cast<size_t>(i)].name + "'");
        if (c == 2) return;
        c = 1;
        if (m.functions[static_cast<size_t>(i)].definition) reads(*m.functions[static_cast<size_t>(i)].definition);
        c = 2;
    };
    for (size_t i = 0; i < m.functions.size(); ++i) fvisit(static_cast<int>(i));

    for (const auto& f : m.functions) {
        if (f.module != m.name) continue;
        if (f.kind == FunctionKind::Derived && !f.definition)
            throw Error(ErrorCode::UnresolvedSymbol, "derived '" + f.name + "' has no definition");
        if (f.kind == FunctionKind::Static && f.codomain.kind != Type::Kind::Timer && !f.definition)
            throw Error(ErrorCode::UnresolvedSymbol, "static '" + f.name + "' has no value");
    }
    for (const auto& t : m.timers)
        if (t.config_key.empty() && !t.duration)
            throw Error(ErrorCode::UnresolvedSymbol, "timer '" + t.name + "' has no duration binding");
}

} // namespace

MachineDefinition parse(const SourceModel& src)
{
    MachineDefinition m;
    m.origin = src.origin;
    Parser p(tokenize(src.text), m);
    p.parse_model();
    resolve_calls(m);
    m.finalize();
    return m;
}

MachineDefinition parse_file(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::CorruptedAsset, "cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse({ss.str(), path.string()});
}

ExprPtr parse_expression(std::string_view text, const MachineDefinition& machine)
{
    // The parser only reads the signature of `machine`; the copy keeps the
    // node counter of the caller untouched.
    MachineDefinition scratch = machine;
    Parser p(tokenize(text), scratch);
    Typed t = p.parse_expr();
    p.expect_end();
    if (t.type.kind != Type::Kind::Boolean)
        throw Error(ErrorCode::TypeMismatch, "expression '" + std::string(text) + "' is not Boolean");
    return t.expr;
}

} // namespace asmwb
