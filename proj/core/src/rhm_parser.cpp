#include "vsched/rhm/parser.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

namespace vsched::rhm {

namespace {

enum class Tok {
    Ident,
    CarVar,   // name@owner
    CcLit,    // ccN
    Int,
    Hash,
    Symbol,   // single-char: ; , ( ) [ ] { } @ . + - *
    Assign,   // :=
    Eq,       // =
    Le,       // <=
    End,
};

struct Token {
    Tok kind = Tok::End;
    std::string text;
    long long value = 0;
    int line = 1;
    int col = 1;
};

class Lexer {
public:
    explicit Lexer(const std::string& text) : s_(text) { advance(); }

    const Token& peek() const { return tok_; }

    Token take() {
        Token t = tok_;
        advance();
        return t;
    }

    // Snapshot/restore for the one backtracking point in the parser.
    struct Mark {
        std::size_t pos;
        int line, col;
        Token tok;
    };
    Mark mark() const { return {pos_, line_, col_, tok_}; }
    void reset(const Mark& m) {
        pos_ = m.pos;
        line_ = m.line;
        col_ = m.col;
        tok_ = m.tok;
    }

private:
    void advance() {
        skip_ws_and_comments();
        tok_ = Token{};
        tok_.line = line_;
        tok_.col = col_;
        if (pos_ >= s_.size()) {
            tok_.kind = Tok::End;
            return;
        }
        char c = s_[pos_];
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            lex_word();
            return;
        }
        if (std::isdigit(static_cast<unsigned char>(c))) {
            lex_int();
            return;
        }
        if (c == '#') {
            get();
            tok_.kind = Tok::Hash;
            tok_.text = "#";
            return;
        }
        if (c == ':') {
            get();
            if (pos_ < s_.size() && s_[pos_] == '=') {
                get();
                tok_.kind = Tok::Assign;
                tok_.text = ":=";
                return;
            }
            fail("expected ':='");
        }
        if (c == '<') {
            get();
            if (pos_ < s_.size() && s_[pos_] == '=') {
                get();
                tok_.kind = Tok::Le;
                tok_.text = "<=";
                return;
            }
            fail("expected '<='");
        }
        if (c == '=') {
            get();
            tok_.kind = Tok::Eq;
            tok_.text = "=";
            return;
        }
        if (std::string(";,()[]{}@.+-*").find(c) != std::string::npos) {
            get();
            tok_.kind = Tok::Symbol;
            tok_.text = std::string(1, c);
            return;
        }
        fail(std::string("unexpected character '") + c + "'");
    }

    void lex_word() {
        std::string w;
        while (pos_ < s_.size() &&
               (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_'))
            w += get();
        // name@owner forms a single car-variable token when '@' is attached.
        if (pos_ < s_.size() && s_[pos_] == '@' && pos_ + 1 < s_.size() &&
            (std::isalnum(static_cast<unsigned char>(s_[pos_ + 1])) || s_[pos_ + 1] == '_')) {
            w += get();
            while (pos_ < s_.size() &&
                   (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_'))
                w += get();
            tok_.kind = Tok::CarVar;
            tok_.text = w;
            return;
        }
        if (w.size() > 2 && w.compare(0, 2, "cc") == 0 &&
            std::all_of(w.begin() + 2, w.end(),
                        [](char ch) { return std::isdigit(static_cast<unsigned char>(ch)); })) {
            tok_.kind = Tok::CcLit;
            tok_.text = w;
            tok_.value = std::stoll(w.substr(2));
            return;
        }
        tok_.kind = Tok::Ident;
        tok_.text = w;
    }

    void lex_int() {
        std::string w;
        while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) w += get();
        tok_.kind = Tok::Int;
        tok_.text = w;
        tok_.value = std::stoll(w);
    }

    void skip_ws_and_comments() {
        while (pos_ < s_.size()) {
            char c = s_[pos_];
            if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
                get();
            } else if (c == '#' && !(pos_ + 1 < s_.size() &&
                                     (std::isalpha(static_cast<unsigned char>(s_[pos_ + 1])) ||
                                      s_[pos_ + 1] == '_'))) {
                while (pos_ < s_.size() && s_[pos_] != '\n') get();
            } else {
                break;
            }
        }
    }

    char get() {
        char c = s_[pos_++];
        if (c == '\n') {
            ++line_;
            col_ = 1;
        } else {
            ++col_;
        }
        return c;
    }

    [[noreturn]] void fail(const std::string& msg) const { throw ParseError(line_, col_, msg); }

    const std::string& s_;
    std::size_t pos_ = 0;
    int line_ = 1;
    int col_ = 1;
    Token tok_;
};

class Parser {
public:
    explicit Parser(const std::string& text) : lex_(text) {}

    std::vector<CmdPtr> program() {
        std::vector<CmdPtr> cmds;
        while (lex_.peek().kind != Tok::End) cmds.push_back(statement());
        return cmds;
    }

private:
    [[noreturn]] void fail(const Token& t, const std::string& msg) {
        throw ParseError(t.line, t.col, msg + " (got '" + (t.kind == Tok::End ? "<eof>" : t.text) + "')");
    }

    Token expect_symbol(const std::string& sym) {
        Token t = lex_.take();
        if (t.kind != Tok::Symbol || t.text != sym) fail(t, "expected '" + sym + "'");
        return t;
    }

    Token expect_ident(const std::string& what) {
        Token t = lex_.take();
        if (t.kind != Tok::Ident) fail(t, "expected " + what);
        return t;
    }

    bool peek_symbol(const std::string& sym) {
        return lex_.peek().kind == Tok::Symbol && lex_.peek().text == sym;
    }

    bool peek_ident(const std::string& kw) {
        return lex_.peek().kind == Tok::Ident && lex_.peek().text == kw;
    }

    CmdPtr statement() {
        CmdPtr c = command();
        expect_symbol(";");
        return c;
    }

    CmdPtr block() {
        // "{ program }" folded into a Seq chain (Skip when empty).
        expect_symbol("{");
        std::vector<CmdPtr> cmds;
        while (!peek_symbol("}")) cmds.push_back(statement());
        expect_symbol("}");
        if (cmds.empty()) {
            auto skip = std::make_shared<Command>();
            skip->kind = CmdKind::Skip;
            return skip;
        }
        CmdPtr acc = cmds.back();
        for (auto it = cmds.rbegin() + 1; it != cmds.rend(); ++it) {
            auto seq = std::make_shared<Command>();
            seq->kind = CmdKind::Seq;
            seq->line = (*it)->line;
            seq->col = (*it)->col;
            seq->a = *it;
            seq->b = acc;
            acc = seq;
        }
        return acc;
    }

    CmdPtr command() {
        Token t = lex_.peek();
        auto cmd = std::make_shared<Command>();
        cmd->line = t.line;
        cmd->col = t.col;
        if (t.kind == Tok::Ident) {
            const std::string& w = t.text;
            if (w == "skip") {
                lex_.take();
                cmd->kind = CmdKind::Skip;
                return cmd;
            }
            if (w == "plan") return plan_cmd(cmd);
            if (w == "asgn" || w == "att") return asgn_att_cmd(cmd, w == "asgn");
            if (w == "free" || w == "exec1") return task_index_cmd(cmd, w);
            if (w == "comp") {
                lex_.take();
                cmd->kind = CmdKind::Comp;
                cmd->task = expect_ident("task variable").text;
                return cmd;
            }
            if (w == "add") return add_cmd(cmd);
            if (w == "if") return if_cmd(cmd);
            if (w == "while") return while_cmd(cmd);
            // Fallthrough: assignment to a plain variable.
            lex_.take();
            cmd->var = w;
            Token a = lex_.take();
            if (a.kind != Tok::Assign) fail(a, "expected ':='");
            if (peek_symbol("{")) {
                lex_.take();
                cmd->kind = CmdKind::LocGet;
                cmd->car = carexpr();
                expect_symbol(".");
                cmd->expr = index_expr();
                expect_symbol("}");
            } else {
                cmd->kind = CmdKind::Assign;
                cmd->expr = expr();
            }
            return cmd;
        }
        fail(t, "expected a command");
    }

    CmdPtr plan_cmd(CmdPtr cmd) {
        lex_.take();
        cmd->kind = CmdKind::Plan;
        Token cv = lex_.take();
        if (cv.kind != Tok::CarVar) fail(cv, "expected annotated car variable (name@owner)");
        cmd->carvar = cv.text;
        expect_symbol("[");
        while (true) {
            cmd->durs.push_back(expr());
            long long pin = -1;
            if (peek_symbol("@")) {
                lex_.take();
                Token n = lex_.take();
                if (n.kind != Tok::Int) fail(n, "expected location id after '@'");
                pin = n.value;
            }
            cmd->loc_pins.push_back(pin);
            if (peek_symbol(",")) {
                lex_.take();
                continue;
            }
            break;
        }
        expect_symbol("]");
        if (peek_ident("as")) {
            lex_.take();
            Token n = lex_.take();
            if (n.kind != Tok::CcLit) fail(n, "expected car resource literal after 'as'");
            cmd->car_pin = n.value;
        }
        return cmd;
    }

    CmdPtr asgn_att_cmd(CmdPtr cmd, bool is_asgn) {
        lex_.take();
        cmd->kind = is_asgn ? CmdKind::Asgn : CmdKind::Att;
        cmd->task = expect_ident("task variable").text;
        expect_symbol("(");
        if (!peek_symbol(")")) {
            while (true) {
                cmd->cars.push_back(carexpr());
                if (peek_symbol(",")) {
                    lex_.take();
                    continue;
                }
                break;
            }
        }
        expect_symbol(")");
        if (!is_asgn && cmd->cars.empty()) fail(lex_.peek(), "att requires at least one car");
        return cmd;
    }

    CmdPtr task_index_cmd(CmdPtr cmd, const std::string& kw) {
        lex_.take();
        cmd->kind = kw == "free" ? CmdKind::Free : CmdKind::Exec1;
        cmd->task = expect_ident("task variable").text;
        Token dot = lex_.take();
        if (!(dot.kind == Tok::Symbol && dot.text == "."))
            fail(dot, kw + " requires a car index (" + kw + " t.e)");
        cmd->expr = index_expr();
        return cmd;
    }

    CmdPtr add_cmd(CmdPtr cmd) {
        lex_.take();
        cmd->kind = CmdKind::Add;
        Token cv = lex_.take();
        if (cv.kind != Tok::CarVar) fail(cv, "expected annotated car variable (name@owner)");
        cmd->carvar = cv.text;
        cmd->expr = expr();
        if (peek_symbol("@")) {
            lex_.take();
            Token n = lex_.take();
            if (n.kind != Tok::Int) fail(n, "expected location id after '@'");
            cmd->add_pin = n.value;
        }
        return cmd;
    }

    CmdPtr if_cmd(CmdPtr cmd) {
        lex_.take();
        cmd->kind = CmdKind::If;
        cmd->cond = bexpr();
        Token t = lex_.take();
        if (!(t.kind == Tok::Ident && t.text == "then")) fail(t, "expected 'then'");
        cmd->a = block();
        if (peek_ident("else")) {
            lex_.take();
            cmd->b = block();
        } else {
            cmd->b = std::make_shared<Command>();
            cmd->b->kind = CmdKind::Skip;
        }
        return cmd;
    }

    CmdPtr while_cmd(CmdPtr cmd) {
        lex_.take();
        cmd->kind = CmdKind::While;
        cmd->cond = bexpr();
        Token t = lex_.take();
        if (!(t.kind == Tok::Ident && t.text == "do")) fail(t, "expected 'do'");
        cmd->a = block();
        return cmd;
    }

    CarExprPtr carexpr() {
        Token t = lex_.peek();
        if (t.kind == Tok::Ident && t.text == "null") {
            lex_.take();
            return car_null();
        }
        if (t.kind == Tok::CcLit) {
            lex_.take();
            return car_lit(t.value);
        }
        if (t.kind == Tok::CarVar) {
            lex_.take();
            return car_var(t.text);
        }
        if (t.kind == Tok::Ident) {
            lex_.take();
            expect_symbol(".");
            return car_index(t.text, index_expr());
        }
        fail(t, "expected a car expression");
    }

    ExprPtr index_expr() {
        Token t = lex_.peek();
        if (t.kind == Tok::Int) {
            lex_.take();
            return lit(t.value);
        }
        if (t.kind == Tok::Ident) {
            lex_.take();
            return var(t.text);
        }
        if (peek_symbol("(")) {
            lex_.take();
            ExprPtr e = expr();
            expect_symbol(")");
            return e;
        }
        fail(t, "expected an index (literal, variable, or parenthesised expression)");
    }

    ExprPtr expr() {
        ExprPtr e = term();
        while (peek_symbol("+") || peek_symbol("-")) {
            bool add = lex_.take().text == "+";
            e = bin(add ? ExprKind::Add : ExprKind::Sub, e, term());
        }
        return e;
    }

    ExprPtr term() {
        ExprPtr e = factor();
        while (peek_symbol("*")) {
            lex_.take();
            e = bin(ExprKind::Mul, e, factor());
        }
        return e;
    }

    ExprPtr factor() {
        Token t = lex_.peek();
        if (t.kind == Tok::Int) {
            lex_.take();
            return lit(t.value);
        }
        if (t.kind == Tok::Hash) {
            lex_.take();
            return length_arg();
        }
        if (t.kind == Tok::Ident) {
            lex_.take();
            return var(t.text);
        }
        if (peek_symbol("(")) {
            lex_.take();
            ExprPtr e = expr();
            expect_symbol(")");
            return e;
        }
        fail(t, "expected an expression");
    }

    ExprPtr length_arg() {
        Token t = lex_.take();
        if (t.kind == Tok::CcLit) return car_len(car_lit(t.value));
        if (t.kind == Tok::CarVar) return car_len(car_var(t.text));
        if (t.kind == Tok::Ident) {
            if (peek_symbol(".")) {
                lex_.take();
                return car_len(car_index(t.text, index_expr()));
            }
            return task_len(t.text);
        }
        fail(t, "expected a car expression or task variable after '#'");
    }

    BoolExprPtr bexpr() {
        BoolExprPtr e = bterm();
        while (peek_ident("or")) {
            lex_.take();
            auto n = std::make_shared<BoolExpr>();
            n->kind = BoolKind::Or;
            n->a = e;
            n->b = bterm();
            e = n;
        }
        return e;
    }

    BoolExprPtr bterm() {
        BoolExprPtr e = bfactor();
        while (peek_ident("and")) {
            lex_.take();
            auto n = std::make_shared<BoolExpr>();
            n->kind = BoolKind::And;
            n->a = e;
            n->b = bfactor();
            e = n;
        }
        return e;
    }

    BoolExprPtr bfactor() {
        Token t = lex_.peek();
        auto node = std::make_shared<BoolExpr>();
        if (t.kind == Tok::Ident && t.text == "true") {
            lex_.take();
            node->kind = BoolKind::True;
            return node;
        }
        if (t.kind == Tok::Ident && t.text == "false") {
            lex_.take();
            node->kind = BoolKind::False;
            return node;
        }
        if (t.kind == Tok::Ident && t.text == "not") {
            lex_.take();
            node->kind = BoolKind::Not;
            node->a = bfactor();
            return node;
        }
        if (peek_symbol("(")) {
            // Either a parenthesised boolean or a parenthesised arithmetic
            // expression starting a comparison; try boolean first.
            Lexer::Mark save = lex_.mark();
            lex_.take();
            try {
                BoolExprPtr inner = bexpr();
                expect_symbol(")");
                return inner;
            } catch (const ParseError&) {
                lex_.reset(save);
            }
        }
        node->l = expr();
        Token op = lex_.take();
        if (op.kind == Tok::Eq)
            node->kind = BoolKind::Eq;
        else if (op.kind == Tok::Le)
            node->kind = BoolKind::Le;
        else
            fail(op, "expected '=' or '<='");
        node->r = expr();
        return node;
    }

    Lexer lex_;
};

}  // namespace

std::vector<CmdPtr> parse_program(const std::string& text) { return Parser(text).program(); }

std::vector<CmdPtr> parse_program_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open program file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_program(ss.str());
}

}  // namespace vsched::rhm
