#pragma once

#include <string>
#include <vector>

#include "vsched/common.hpp"
#include "vsched/rhm/ast.hpp"

namespace vsched::rhm {

// Concrete syntax, one command per semicolon:
//
//   program  := { command ";" }
//   command  := "skip"
//             | ident ":=" expr
//             | ident ":=" "{" carexpr "." index "}"
//             | "plan" carvar "[" planitem {"," planitem} "]" ["as" cclit]
//             | "asgn" ident "(" [carexpr {"," carexpr}] ")"
//             | "att" ident "(" carexpr {"," carexpr} ")"
//             | "free" ident "." index
//             | "comp" ident
//             | "add" carvar expr ["@" int]
//             | "exec1" ident "." index
//             | "if" bexpr "then" "{" program "}" ["else" "{" program "}"]
//             | "while" bexpr "do" "{" program "}"
//   planitem := expr ["@" int]
//   carexpr  := "null" | cclit | carvar | ident "." index
//   index    := int | ident | "(" expr ")"
//   expr     := term {("+"|"-") term};  term := factor {"*" factor}
//   factor   := int | ident | "(" expr ")" | "#" lenarg
//   lenarg   := cclit | carvar | ident ["." index]
//   bexpr    := bterm {"or" bterm};  bterm := bfactor {"and" bfactor}
//   bfactor  := "true" | "false" | "not" bfactor | "(" bexpr ")"
//             | expr ("=" | "<=") expr
//
// Car variables are single tokens of the form name@owner ("c1@0"); car
// resource literals are ccN ("cc3"). A "#" directly followed by a letter is
// the length operator (#c1@0, #t8); any other "#" starts a line comment.
// "@ N" location pins and "as ccN" car pins fix the resource ids a plan or
// add allocates, which lets compiled programs carry physical station
// identity; unpinned allocations draw the least unused positive id.
std::vector<CmdPtr> parse_program(const std::string& text);
std::vector<CmdPtr> parse_program_file(const std::string& path);

}  // namespace vsched::rhm
