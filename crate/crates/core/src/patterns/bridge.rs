//! Expression trees for surface-language programs. Each assignment becomes
//! an `AssignE` root over its value; conditions and loop headers become
//! their own roots.

use super::ExprTree;
use crate::surface::{Expr, Stmt, SurfaceProgram, UnaryOp};

pub fn surface_to_trees(sp: &SurfaceProgram) -> Vec<ExprTree> {
    let mut out = Vec::new();
    block(&sp.body, &mut out);
    out
}

fn assign(value: &Expr) -> ExprTree {
    ExprTree::node("AssignE", "assign", vec![expr(value)])
}

fn block(stmts: &[Stmt], out: &mut Vec<ExprTree>) {
    for s in stmts {
        match s {
            Stmt::Assign { value, .. } => out.push(assign(value)),
            Stmt::If {
                cond,
                then_branch,
                else_branch,
            } => {
                out.push(expr(cond));
                block(then_branch, out);
                block(else_branch, out);
            }
            Stmt::For {
                init,
                cond,
                step,
                body,
                ..
            } => {
                out.push(assign(init));
                out.push(expr(cond));
                out.push(assign(step));
                block(body, out);
            }
            Stmt::Return(_) => {}
        }
    }
}

fn expr(e: &Expr) -> ExprTree {
    match e {
        Expr::Int(n) => ExprTree::int(*n),
        Expr::Var(_) => ExprTree::leaf("NameE"),
        Expr::Index(_, idx) => ExprTree {
            children: vec![ExprTree::leaf("NameE"), expr(idx)],
            ..ExprTree::leaf("ArrayAccessE")
        },
        Expr::Unary(op, inner) => {
            let name = match op {
                UnaryOp::Neg => "negative",
                UnaryOp::Not => "not",
            };
            ExprTree::unary(name, expr(inner))
        }
        Expr::Binary(op, l, r) => ExprTree::binary(op.pattern_name(), expr(l), expr(r)),
    }
}
