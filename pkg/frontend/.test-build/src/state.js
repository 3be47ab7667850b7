/** Pure view-state helpers; everything renderable is derived from the
 * server's session document plus the current next-query response. */
export function phaseOf(doc) {
    if (doc === null)
        return "start";
    if (doc.finalized)
        return "finalized";
    if (doc.rounds_answered >= doc.budget)
        return "exhausted";
    return "annotating";
}
export function progressFraction(doc) {
    return doc.budget === 0 ? 1 : doc.rounds_answered / doc.budget;
}
export function clamp01(v) {
    if (Number.isNaN(v))
        return 0;
    return Math.min(1, Math.max(0, v));
}
/** Slider values for a query, prefilled from the imputed descriptor. */
export function prefillValues(query) {
    return query.attributes.map((a) => clamp01(a.current_value));
}
export function validValues(query, values) {
    return (values.length === query.attributes.length &&
        values.every((v) => Number.isFinite(v) && v >= 0 && v <= 1));
}
/** Case-insensitive substring filter over id, name, and supercategory. */
export function filterClasses(classes, query) {
    const needle = query.trim().toLowerCase();
    if (!needle)
        return classes;
    return classes.filter((c) => [c.id, c.name, c.supercategory].some((s) => s.toLowerCase().includes(needle)));
}
/** Per-group descriptor preview: which groups came from the annotator and
 * which are still imputed from the similar class. */
export function descriptorPreview(doc, groupMembers) {
    const answered = new Set(doc.answered_groups);
    return groupMembers.map((members, g) => ({
        groupId: g,
        name: doc.group_names[g] ?? `group_${g}`,
        status: answered.has(g) ? "annotated" : "imputed",
        values: members.map((j) => doc.descriptor[j]),
    }));
}
export function sessionIdFromHash(hash) {
    const match = /#session=([a-f0-9]+)/.exec(hash);
    return match ? match[1] : null;
}
