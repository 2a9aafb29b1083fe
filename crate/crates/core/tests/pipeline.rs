//! Property tests across the parse → bind → plan → generate pipeline.

use proptest::prelude::*;

use ftg_core::abi::AbiModel;
use ftg_core::c_model::{
    parse_translation_unit, pretty_print, BasicType, Field, FunctionSignature, Param, RecordDef,
    SourceLoc, SourceModel, TypeRef,
};
use ftg_core::codegen::{generate_target, CodegenOptions};
use ftg_core::directives::{AnnotatedFunction, ParamRole, TargetOrigin};
use ftg_core::discovery::discover;
use ftg_core::layout::plan_layout;

fn basic_type() -> impl Strategy<Value = BasicType> {
    prop::sample::select(BasicType::all_sized().to_vec())
}

fn integer_type() -> impl Strategy<Value = BasicType> {
    prop::sample::select(
        BasicType::all_sized()
            .iter()
            .copied()
            .filter(|b| b.is_integer())
            .collect::<Vec<_>>(),
    )
}

#[derive(Debug, Clone)]
enum ParamKind {
    SerBasic(BasicType),
    SerRecord(usize),
    Fixed,
    Output(BasicType),
}

fn param_kind() -> impl Strategy<Value = ParamKind> {
    prop_oneof![
        4 => basic_type().prop_map(ParamKind::SerBasic),
        2 => (0..3usize).prop_map(ParamKind::SerRecord),
        1 => Just(ParamKind::Fixed),
        1 => basic_type().prop_map(ParamKind::Output),
    ]
}

fn records_strategy() -> impl Strategy<Value = Vec<RecordDef>> {
    prop::collection::vec(prop::collection::vec(basic_type(), 1..6), 0..3).prop_map(|records| {
        records
            .into_iter()
            .enumerate()
            .map(|(r, fields)| RecordDef {
                name: format!("R{r}"),
                fields: fields
                    .into_iter()
                    .enumerate()
                    .map(|(f, b)| Field { name: format!("f{f}"), ty: TypeRef::Basic(b) })
                    .collect(),
            })
            .collect()
    })
}

/// A random valid bound function over a random model, covering every
/// role kind and at most one array pair.
fn arb_case() -> impl Strategy<Value = (SourceModel, AnnotatedFunction)> {
    (
        records_strategy(),
        prop::collection::vec(param_kind(), 0..8),
        prop::option::of((basic_type(), integer_type())),
    )
        .prop_map(|(records, kinds, array)| {
            let mut model = SourceModel::new();
            for rec in records {
                model.records.insert(rec.name.clone(), rec);
            }

            let mut params = Vec::new();
            let mut roles = Vec::new();
            for kind in kinds {
                let position = params.len();
                let name = format!("p{position}");
                match kind {
                    ParamKind::SerBasic(b) => {
                        params.push(Param { name, ty: TypeRef::Basic(b), position });
                        roles.push(ParamRole::Serialized);
                    }
                    ParamKind::SerRecord(r) => {
                        if model.records.is_empty() {
                            params.push(Param { name, ty: TypeRef::Basic(BasicType::Int), position });
                        } else {
                            let rec = format!("R{}", r % model.records.len());
                            params.push(Param { name, ty: TypeRef::Record(rec), position });
                        }
                        roles.push(ParamRole::Serialized);
                    }
                    ParamKind::Fixed => {
                        params.push(Param { name, ty: TypeRef::Basic(BasicType::Int), position });
                        roles.push(ParamRole::Fixed("42".to_string()));
                    }
                    ParamKind::Output(b) => {
                        params.push(Param {
                            name,
                            ty: TypeRef::pointer_to(TypeRef::Basic(b)),
                            position,
                        });
                        roles.push(ParamRole::Output);
                    }
                }
            }
            if let Some((elem, len_ty)) = array {
                let position = params.len();
                params.push(Param {
                    name: format!("p{position}"),
                    ty: TypeRef::pointer_to(TypeRef::Basic(elem)),
                    position,
                });
                roles.push(ParamRole::ArrayData);
                let position = params.len();
                params.push(Param {
                    name: format!("p{position}"),
                    ty: TypeRef::Basic(len_ty),
                    position,
                });
                roles.push(ParamRole::ArrayLen);
            }

            let signature = FunctionSignature {
                name: "probe_fn".to_string(),
                return_type: TypeRef::Basic(BasicType::Void),
                params,
                variadic: false,
                comment_block: String::new(),
                location: SourceLoc { file: "gen.c".into(), line: 1 },
            };
            let func = AnnotatedFunction {
                signature,
                roles,
                cleanup: None,
                origin: TargetOrigin::Annotated,
            };
            (model, func)
        })
}

proptest! {
    /// Slot extents tile [0, fixed_size) exactly: packed offsets, no
    /// gaps, no overlaps, and byte accounting adds up.
    #[test]
    fn slots_tile_exactly((model, func) in arb_case()) {
        let abi = AbiModel::lp64();
        let plan = plan_layout(&model, &abi, &func).unwrap();

        let mut cursor = 0usize;
        for slot in &plan.slots {
            prop_assert_eq!(slot.offset, cursor, "packed offsets");
            prop_assert!(slot.length > 0);
            cursor += slot.length;
        }
        prop_assert_eq!(plan.fixed_size, cursor);
        prop_assert_eq!(plan.min_input_size, plan.fixed_size);

        // Slots belong to serialized params only, in declaration order.
        let serialized: Vec<usize> = func
            .roles
            .iter()
            .enumerate()
            .filter(|(_, r)| **r == ParamRole::Serialized)
            .map(|(i, _)| i)
            .collect();
        prop_assert_eq!(
            plan.slots.iter().map(|s| s.param_position).collect::<Vec<_>>(),
            serialized
        );
    }

    /// Re-roling a serialized parameter to FIXED removes exactly its
    /// slot's bytes; fixed_size depends only on serialized param types.
    #[test]
    fn fixed_size_accounting((model, func) in arb_case()) {
        let abi = AbiModel::lp64();
        let plan = plan_layout(&model, &abi, &func).unwrap();
        for slot in &plan.slots {
            let mut reduced = func.clone();
            reduced.roles[slot.param_position] = ParamRole::Fixed("0".to_string());
            let replanned = plan_layout(&model, &abi, &reduced).unwrap();
            prop_assert_eq!(replanned.fixed_size, plan.fixed_size - slot.length);
        }
    }

    /// For every input size S >= fixed_size the computed element count
    /// uses as much of the tail as element size allows and no more.
    #[test]
    fn array_length_is_accurate((model, func) in arb_case(), extra in 0usize..256) {
        let abi = AbiModel::lp64();
        let plan = plan_layout(&model, &abi, &func).unwrap();
        if let Some(array) = &plan.array {
            let input_size = plan.fixed_size + extra;
            let count = plan.element_count(input_size).unwrap();
            prop_assert!(count * array.element_size <= input_size - plan.fixed_size);
            prop_assert!(input_size - plan.fixed_size < (count + 1) * array.element_size);
        }
    }

    /// Every random valid case generates a harness with exactly one
    /// entry point and exactly one target call.
    #[test]
    fn generation_is_total_over_valid_cases((model, func) in arb_case()) {
        let abi = AbiModel::lp64();
        let plan = plan_layout(&model, &abi, &func).unwrap();
        let target = generate_target(&model, &abi, &func, &plan, &CodegenOptions::default()).unwrap();
        prop_assert_eq!(
            target.source_text.matches("int LLVMFuzzerTestOneInput(uint8_t *data, size_t size)").count(),
            1
        );
        prop_assert_eq!(target.source_text.matches("probe_fn(").count(), 2, "prototype + one call");
        prop_assert_eq!(target.min_input_size, plan.min_input_size);
    }
}

fn model_source() -> impl Strategy<Value = String> {
    (records_strategy(), prop::collection::vec(prop::collection::vec(basic_type(), 0..4), 0..4))
        .prop_map(|(records, funcs)| {
            let mut model = SourceModel::new();
            for rec in records {
                model.records.insert(rec.name.clone(), rec);
            }
            for (i, param_types) in funcs.into_iter().enumerate() {
                let params = param_types
                    .into_iter()
                    .enumerate()
                    .map(|(p, b)| Param { name: format!("p{p}"), ty: TypeRef::Basic(b), position: p })
                    .collect();
                model.functions.push(FunctionSignature {
                    name: format!("fn{i}"),
                    return_type: TypeRef::Basic(BasicType::Void),
                    params,
                    variadic: false,
                    comment_block: String::new(),
                    location: SourceLoc { file: "gen.c".into(), line: 1 },
                });
            }
            pretty_print(&model)
        })
}

proptest! {
    /// Parsing, pretty-printing, and re-parsing is a fixpoint.
    #[test]
    fn round_trip_stability(src in model_source()) {
        let first = parse_translation_unit(&src, "a.c").unwrap();
        let printed = pretty_print(&first.model);
        let second = parse_translation_unit(&printed, "b.c").unwrap();
        prop_assert_eq!(&first.model.records, &second.model.records);
        prop_assert_eq!(&first.model.aliases, &second.model.aliases);
        prop_assert_eq!(first.model.functions.len(), second.model.functions.len());
        for (a, b) in first.model.functions.iter().zip(&second.model.functions) {
            prop_assert_eq!(&a.name, &b.name);
            prop_assert_eq!(&a.params, &b.params);
            prop_assert_eq!(&a.comment_block, &b.comment_block);
        }
    }

    /// A function preceded by K contiguous comment lines gets exactly
    /// those K lines, in order; blank lines cut the run.
    #[test]
    fn comment_attachment_is_exact(
        k in 0usize..5,
        orphan in proptest::bool::ANY,
        words in prop::collection::vec("[a-z]{1,12}", 5),
    ) {
        let mut src = String::new();
        if orphan {
            src.push_str("// orphaned above a blank line\n\n");
        }
        let mut expected = Vec::new();
        for i in 0..k {
            let line = format!("// {} {}", words[i % words.len()], i);
            expected.push(line.clone());
            src.push_str(&line);
            src.push('\n');
        }
        src.push_str("void f(int a);\n");

        let unit = parse_translation_unit(&src, "c.c").unwrap();
        prop_assert_eq!(unit.model.functions.len(), 1);
        prop_assert_eq!(&unit.model.functions[0].comment_block, &expected.join("\n"));
    }

    /// Discovery soundness: every eligible function passes plan and
    /// generate without error.
    #[test]
    fn discovered_functions_always_generate(src in model_source()) {
        let unit = parse_translation_unit(&src, "d.c").unwrap();
        let report = discover(&unit.model);
        let abi = AbiModel::lp64();
        for bound in &report.eligible {
            let plan = plan_layout(&unit.model, &abi, bound);
            prop_assert!(plan.is_ok(), "plan failed for {}: {:?}", bound.signature.name, plan);
            let target = generate_target(
                &unit.model,
                &abi,
                bound,
                plan.as_ref().unwrap(),
                &CodegenOptions::default(),
            );
            prop_assert!(target.is_ok(), "generate failed for {}", bound.signature.name);
        }
        // Union covers all functions and the split is disjoint.
        prop_assert_eq!(
            report.eligible.len() + report.skipped.len(),
            unit.model.functions.len()
        );
    }
}
